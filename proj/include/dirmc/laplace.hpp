#pragma once

// Closed-form Laplace asymptotics on the simplex: first and second moments of
// exp(nH), the Beta-function asymptotic, the limiting squared correlation of
// the KL control variate, and the epsilon-sparsity lower bound.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>

#include "dirmc/maximizer.hpp"
#include "dirmc/objectives.hpp"
#include "dirmc/simplex.hpp"

namespace dirmc {

// log I(n) ~ logConstant + n * exponentialRate + polyExponent * log n
struct LaplaceApprox {
  double logConstant = 0.0;
  double exponentialRate = 0.0;
  double polyExponent = 0.0;

  double evaluate(double n) const;
};

// -(K-1-m)/2 - sum_{k active} alpha_k
double laplacePolyExponent(const MaximizerReport& report, const DirichletParams& alpha);

// log[(1/B(alpha)) prod_{j in support} theta*_j^(alpha_j - 1)]
double logPartialDirichlet(const MaximizerReport& report, const DirichletParams& alpha);

// log det(-M) via Cholesky; throws NumericalError when M is not negative
// definite. The empty matrix has log-determinant 0.
double logDetNegDef(const Eigen::MatrixXd& m);

LaplaceApprox laplaceFirstMoment(const MaximizerReport& report, const DirichletParams& alpha, double hAtStar);
// E[exp(2nH)]: the first-moment constant evaluated at 2n, folded so that
// evaluate(n) needs no substitution by the caller.
LaplaceApprox laplaceSecondMomentPlain(const MaximizerReport& report, const DirichletParams& alpha, double hAtStar);
// Second moment of the IS estimator, with the (2 lambda)^(-alpha) and
// pi^((K-1-m)/2) constant.
LaplaceApprox laplaceSecondMomentIS(const MaximizerReport& report, const DirichletParams& alpha, double hAtStar);

struct BetaAsymptotic {
  double logConstant = 0.0;
  double polyExponent = 0.0;
  double rate = 0.0;  // theta* . log theta*

  double evaluate(double x) const { return logConstant + polyExponent * std::log(x) + x * rate; }
};

BetaAsymptotic betaAsymptoticTerms(const DirichletParams& alpha, const SimplexPoint& thetaStar);
// log of the large-x approximation to B(alpha + x theta*)
double betaAsymptotic(const DirichletParams& alpha, const SimplexPoint& thetaStar, double x);

// Boundary-case formula with Q = U^T hess U and R the reduced Hessian of
// -KL(theta*|.) at theta*. The vertex case has determinant factor 1.
double limitingRhoSquared(const MaximizerReport& report, const DirichletParams& alpha);
// Interior form with the full K x K Hessians; requires m = 0.
double limitingRhoSquaredInterior(const MaximizerReport& report);

// Reduced Hessian of -KL(theta*|.) at theta*, in the report's permuted frame.
Eigen::MatrixXd reducedKlHessian(const MaximizerReport& report);

struct SparsityMeasure {
  double epsilon = 0.0;
  bool b1Holds = true;
  std::size_t tieWord = 0;  // first word violating B1 when !b1Holds
};

// max_v sum_{j != k(v)} phi_j(v) / phi_{k(v)}(v), with B1 tie detection at 1e-12.
SparsityMeasure measureSparsity(const TopicMatrix& phi);

struct SparsityReport {
  double epsilon = 0.0;
  double cMax1 = 0.0;
  double cMax2 = 0.0;
  double epsilonZero = 0.0;
  double constantC = 0.0;  // sqrt(F(eps0)) / sqrt(1 - eps0 sqrt(F(eps0)))
  bool b1Holds = true;
  bool applicable = false;
  std::string reason;      // why the bound is not applicable
  // exp(-C^2 eps^2 / 8), the bound delivered by the proof.
  std::optional<double> lowerBound;
  // exp(-C^2 eps^2), the bound as stated.
  std::optional<double> lowerBoundTheorem;
};

double sparsityF(double eps, double cMax1, double cMax2, std::size_t k);
// Root of eps * sqrt(F(eps)) = 1/2 by bisection.
double sparsityEpsilonZero(double cMax1, double cMax2, std::size_t k);

SparsityReport sparsityReport(const LdaInstance& inst, const MaximizerReport& report);

}  // namespace dirmc
