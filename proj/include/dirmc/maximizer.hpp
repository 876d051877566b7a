#pragma once

// Maximizer of the LDA log-likelihood over the simplex (Cover's multiplicative
// fixed-point iteration) and the KKT / active-set / reduced-Hessian report
// consumed by the Laplace constants and the limiting correlations.

#include <Eigen/Dense>
#include <vector>

#include "dirmc/error.hpp"
#include "dirmc/objectives.hpp"
#include "dirmc/simplex.hpp"

namespace dirmc {

class KktViolation : public GenerationError {
 public:
  using GenerationError::GenerationError;
};

struct CoverConfig {
  int maxIters = 10000;
  double valueTol = 1e-14;
  double zeroTol = 1e-8;
  double kktTol = 1e-6;

  void validate() const;
};

struct CoverResult {
  SimplexPoint point;
  std::vector<double> valueTrace;  // H(b^t), t = 0..iterations
  int iterations = 0;
};

// b_i <- b_i * sum_v p_v phi_i(v) / (b^T phi(v)). b0 must be strictly positive.
CoverResult coverMaximize(const LdaInstance& inst, const CoverConfig& cfg, const SimplexPoint& b0);

struct MaximizerReport {
  SimplexPoint thetaStar;               // snapped: active coordinates exactly zero
  std::vector<std::size_t> activeSet;   // original indices, ascending
  std::vector<double> lambda;           // KKT multipliers aligned with activeSet
  double mu = 1.0;
  // permutation[j] is the original index placed at position j; active indices
  // come first, then the support in ascending order.
  std::vector<std::size_t> permutation;
  Eigen::MatrixXd reducedHessian;       // U^T (P^T hess P) U, size K-1-m
  bool reducedHessianNegativeDefinite = false;
  bool strictComplementarity = true;
  double minLambda = 0.0;               // +inf when the active set is empty
  double kktResidual = 0.0;             // max over the support of |grad_i - mu|
  double hAtStar = 0.0;
  Eigen::VectorXd gradient;             // original indexing
  Eigen::MatrixXd hessian;              // original indexing

  std::size_t m() const { return activeSet.size(); }
  std::size_t dim() const { return thetaStar.size(); }
  // Coordinates of thetaStar in permuted order.
  std::vector<double> permutedThetaStar() const;
  // Any per-coordinate vector (e.g. alpha) in permuted order.
  std::vector<double> permute(std::span<const double> values) const;
};

// Columns span the critical cone {d : 1^T d = 0, d_i = 0 for i < m}:
// U = [0_{m x (K-1-m)}; I_{K-1-m}; -1^T]. Empty (K x 0) when m = K-1.
Eigen::MatrixXd criticalConeBasis(std::size_t k, std::size_t m);

struct ReducedHessian {
  Eigen::MatrixXd matrix;
  bool negativeDefinite = false;
};

// U^T M U with a Cholesky test of -(U^T M U).
ReducedHessian reducedHessian(const Eigen::MatrixXd& hess, const Eigen::MatrixXd& basis);

// Active-set detection, snapping, multipliers and reduced Hessian at a
// near-stationary point. Throws KktViolation when a supported coordinate has
// |grad_i - 1| > kktTol.
MaximizerReport kktReport(const LdaInstance& inst, const SimplexPoint& thetaStar, const CoverConfig& cfg);

// Report for the KL surrogate objective: lambda_i = 1 on the active set and
// Hessian -diag(1/theta*).
MaximizerReport klReport(const KlObjective& obj);

struct MaximizerResult {
  CoverResult cover;
  MaximizerReport report;
  int newtonSteps = 0;
};

// Cover iterations from the barycenter, active-set snapping, a few Newton
// steps on the supporting face, then kktReport.
MaximizerResult findMaximizer(const LdaInstance& inst, const CoverConfig& cfg = {});

}  // namespace dirmc
