#include "dirmc/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dirmc {

namespace {

void checkDims(const MaximizerReport& report, const DirichletParams& alpha) {
  if (alpha.size() != report.dim()) throw ValidationError("alpha and theta* have different dimensions");
}

std::size_t freeDim(const MaximizerReport& report) { return report.dim() - 1 - report.m(); }

void requireA4(const MaximizerReport& report) {
  if (!report.reducedHessianNegativeDefinite)
    throw NumericalError("reduced Hessian is not negative definite (A4 fails)");
}

void requirePositiveLambda(const MaximizerReport& report) {
  for (double lam : report.lambda)
    if (!(lam > 0.0)) throw NumericalError("a KKT multiplier is not positive; strict complementarity is required");
}

// sum_k [-alpha_k log(scale * lambda_k) + logGamma(alpha_k)] over the active set
double activeFactor(const MaximizerReport& report, const DirichletParams& alpha, double scale) {
  double s = 0.0;
  for (std::size_t j = 0; j < report.m(); ++j) {
    const double a = alpha[report.activeSet[j]];
    s += -a * std::log(scale * report.lambda[j]) + std::lgamma(a);
  }
  return s;
}

}  // namespace

double LaplaceApprox::evaluate(double n) const {
  return logConstant + n * exponentialRate + polyExponent * std::log(n);
}

double laplacePolyExponent(const MaximizerReport& report, const DirichletParams& alpha) {
  checkDims(report, alpha);
  double p = -0.5 * static_cast<double>(freeDim(report));
  for (auto i : report.activeSet) p -= alpha[i];
  return p;
}

double logPartialDirichlet(const MaximizerReport& report, const DirichletParams& alpha) {
  checkDims(report, alpha);
  double s = -logMultivariateBeta(alpha);
  for (std::size_t i = 0; i < report.dim(); ++i)
    if (report.thetaStar[i] > 0.0) s += (alpha[i] - 1.0) * std::log(report.thetaStar[i]);
  return s;
}

double logDetNegDef(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(-m);
  if (llt.info() != Eigen::Success) throw NumericalError("matrix is not negative definite");
  const Eigen::MatrixXd& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += 2.0 * std::log(l(i, i));
  return s;
}

LaplaceApprox laplaceFirstMoment(const MaximizerReport& report, const DirichletParams& alpha, double hAtStar) {
  checkDims(report, alpha);
  requireA4(report);
  requirePositiveLambda(report);
  const double d = static_cast<double>(freeDim(report));
  LaplaceApprox out;
  out.logConstant = logPartialDirichlet(report, alpha) + activeFactor(report, alpha, 1.0) +
                    0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * logDetNegDef(report.reducedHessian);
  out.exponentialRate = hAtStar;
  out.polyExponent = laplacePolyExponent(report, alpha);
  return out;
}

LaplaceApprox laplaceSecondMomentPlain(const MaximizerReport& report, const DirichletParams& alpha, double hAtStar) {
  LaplaceApprox out = laplaceFirstMoment(report, alpha, hAtStar);
  // C (2n)^p = (C 2^p) n^p
  out.logConstant += out.polyExponent * std::numbers::ln2;
  out.exponentialRate = 2.0 * hAtStar;
  return out;
}

LaplaceApprox laplaceSecondMomentIS(const MaximizerReport& report, const DirichletParams& alpha, double hAtStar) {
  checkDims(report, alpha);
  requireA4(report);
  requirePositiveLambda(report);
  const double d = static_cast<double>(freeDim(report));
  LaplaceApprox out;
  out.logConstant = logPartialDirichlet(report, alpha) + activeFactor(report, alpha, 2.0) +
                    0.5 * d * std::log(std::numbers::pi) - 0.5 * logDetNegDef(report.reducedHessian);
  out.exponentialRate = 2.0 * hAtStar;
  out.polyExponent = laplacePolyExponent(report, alpha);
  return out;
}

BetaAsymptotic betaAsymptoticTerms(const DirichletParams& alpha, const SimplexPoint& thetaStar) {
  if (alpha.size() != thetaStar.size()) throw ValidationError("alpha and theta* have different dimensions");
  BetaAsymptotic out;
  std::size_t support = 0;
  double sumActiveAlpha = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double t = thetaStar[i];
    if (t > 0.0) {
      ++support;
      out.logConstant += (alpha[i] - 0.5) * std::log(t);
      out.rate += t * std::log(t);
    } else {
      out.logConstant += std::lgamma(alpha[i]);
      sumActiveAlpha += alpha[i];
    }
  }
  const double d = static_cast<double>(support) - 1.0;
  out.logConstant += 0.5 * d * std::log(2.0 * std::numbers::pi);
  out.polyExponent = -0.5 * d - sumActiveAlpha;
  return out;
}

double betaAsymptotic(const DirichletParams& alpha, const SimplexPoint& thetaStar, double x) {
  if (!(x > 0.0)) throw ValidationError("betaAsymptotic needs x > 0");
  return betaAsymptoticTerms(alpha, thetaStar).evaluate(x);
}

Eigen::MatrixXd reducedKlHessian(const MaximizerReport& report) {
  const std::size_t k = report.dim();
  const auto perm = report.permutedThetaStar();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i)
    if (perm[i] > 0.0) h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = -1.0 / perm[i];
  return reducedHessian(h, criticalConeBasis(k, report.m())).matrix;
}

double limitingRhoSquared(const MaximizerReport& report, const DirichletParams& alpha) {
  checkDims(report, alpha);
  requireA4(report);
  double logRho = 0.0;
  if (freeDim(report) > 0) {
    const Eigen::MatrixXd& q = report.reducedHessian;
    const Eigen::MatrixXd r = reducedKlHessian(report);
    logRho = 0.5 * logDetNegDef(q) + 0.5 * logDetNegDef(r) - logDetNegDef(0.5 * (q + r));
  }
  for (std::size_t j = 0; j < report.m(); ++j) {
    const double lam = report.lambda[j];
    if (!(lam > 0.0)) return 0.0;
    logRho += alpha[report.activeSet[j]] * (std::log(4.0 * lam) - 2.0 * std::log1p(lam));
  }
  return std::clamp(std::exp(logRho), 0.0, 1.0);
}

double limitingRhoSquaredInterior(const MaximizerReport& report) {
  if (report.m() != 0) throw ValidationError("interior correlation formula needs an interior maximizer");
  const auto k = static_cast<Eigen::Index>(report.dim());
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) r(i, i) = -1.0 / report.thetaStar[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd& q = report.hessian;
  const double logRho = 0.5 * logDetNegDef(q) + 0.5 * logDetNegDef(r) - logDetNegDef(0.5 * (q + r));
  return std::clamp(std::exp(logRho), 0.0, 1.0);
}

SparsityMeasure measureSparsity(const TopicMatrix& phi) {
  SparsityMeasure out;
  const auto& m = phi.matrix();
  for (Eigen::Index v = 0; v < m.cols(); ++v) {
    Eigen::Index top = 0;
    const double best = m.col(v).maxCoeff(&top);
    if (!(best > 0.0)) {
      out.b1Holds = false;
      out.tieWord = static_cast<std::size_t>(v);
      out.epsilon = std::numeric_limits<double>::quiet_NaN();
      return out;
    }
    double rest = 0.0;
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
      if (k == top) continue;
      if (std::abs(m(k, v) - best) <= 1e-12) {
        out.b1Holds = false;
        out.tieWord = static_cast<std::size_t>(v);
        out.epsilon = std::numeric_limits<double>::quiet_NaN();
        return out;
      }
      rest += m(k, v);
    }
    out.epsilon = std::max(out.epsilon, rest / best);
  }
  return out;
}

double sparsityF(double eps, double cMax1, double cMax2, std::size_t k) {
  const double kk = static_cast<double>(k);
  const double t = 2.0 * cMax1 + cMax2 * eps;
  return 4.0 * cMax2 * cMax2 * kk + kk * (kk - 1.0) * t * t;
}

double sparsityEpsilonZero(double cMax1, double cMax2, std::size_t k) {
  auto g = [&](double e) { return e * std::sqrt(sparsityF(e, cMax1, cMax2, k)); };
  double lo = 0.0;
  double hi = 1.0;
  while (g(hi) <= 0.5) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (g(mid) < 0.5 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SparsityReport sparsityReport(const LdaInstance& inst, const MaximizerReport& report) {
  const std::size_t k = inst.numTopics();
  if (report.dim() != k) throw ValidationError("report and instance dimensions differ");
  SparsityReport out;
  const auto measure = measureSparsity(inst.phi());
  out.epsilon = measure.epsilon;
  out.b1Holds = measure.b1Holds;

  const auto& t = report.thetaStar.vec();
  const double tMax = *std::max_element(t.begin(), t.end());
  const double tMin = *std::min_element(t.begin(), t.end());
  if (tMin > 0.0) {
    out.cMax1 = std::sqrt(tMax) / std::pow(tMin, 1.5);
    out.cMax2 = tMax / (tMin * tMin);
    out.epsilonZero = sparsityEpsilonZero(out.cMax1, out.cMax2, k);
    const double root = out.epsilonZero * std::sqrt(sparsityF(out.epsilonZero, out.cMax1, out.cMax2, k));
    out.constantC = std::sqrt(sparsityF(out.epsilonZero, out.cMax1, out.cMax2, k)) / std::sqrt(1.0 - root);
  }

  std::ostringstream why;
  if (!measure.b1Holds) {
    why << "B1 violated: dominant topic of word " << measure.tieWord << " is not unique";
  } else if (report.m() != 0 || !(tMin > 0.0)) {
    why << "theta* is not interior";
  } else if (k <= 3) {
    why << "bound requires K > 3";
  } else if (!(out.epsilon < out.epsilonZero)) {
    why << "epsilon " << out.epsilon << " is not below epsilon_0 " << out.epsilonZero;
  }
  out.reason = why.str();
  out.applicable = out.reason.empty();
  if (out.applicable) {
    const double c2e2 = out.constantC * out.constantC * out.epsilon * out.epsilon;
    out.lowerBound = std::exp(-c2e2 / 8.0);
    out.lowerBoundTheorem = std::exp(-c2e2);
  }
  return out;
}

}  // namespace dirmc
