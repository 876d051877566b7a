#include "dirmc/maximizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dirmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();


// Active indices first, then the support, both ascending.
std::vector<std::size_t> activeFirstPermutation(const std::vector<std::size_t>& active, std::size_t k) {
  std::vector<std::size_t> perm(active);
  std::vector<bool> isActive(k, false);
  for (auto i : active) isActive[i] = true;
  for (std::size_t i = 0; i < k; ++i)
    if (!isActive[i]) perm.push_back(i);
  return perm;
}

Eigen::MatrixXd permuteSymmetric(const Eigen::MatrixXd& h, const std::vector<std::size_t>& perm) {
  const auto k = static_cast<Eigen::Index>(perm.size());
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      out(a, b) = h(static_cast<Eigen::Index>(perm[a]), static_cast<Eigen::Index>(perm[b]));
  return out;
}

// Fills the fields shared by the LDA and KL reports once theta*, gradient and
// Hessian are known.
void finishReport(MaximizerReport& r) {
  const std::size_t k = r.thetaStar.size();
  r.permutation = activeFirstPermutation(r.activeSet, k);
  const auto basis = criticalConeBasis(k, r.activeSet.size());
  auto red = reducedHessian(permuteSymmetric(r.hessian, r.permutation), basis);
  r.reducedHessian = std::move(red.matrix);
  r.reducedHessianNegativeDefinite = red.negativeDefinite;
}

// Newton steps for max H on the face {theta_i = 0 for i not in support}.
int polishOnFace(const LdaInstance& inst, std::vector<double>& theta, int maxSteps) {
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (theta[i] > 0.0) support.push_back(i);
  const auto s = static_cast<Eigen::Index>(support.size());
  if (s < 2) return 0;

  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(s, s - 1);
  basis.topRows(s - 1).setIdentity();
  basis.row(s - 1).setConstant(-1.0);

  int steps = 0;
  auto current = ldaEvaluate(inst, theta, true, true);
  for (; steps < maxSteps; ++steps) {
    if (!std::isfinite(current.value)) break;
    Eigen::VectorXd g(s);
    Eigen::MatrixXd h(s, s);
    for (Eigen::Index a = 0; a < s; ++a) {
      g(a) = (*current.gradient)(static_cast<Eigen::Index>(support[a]));
      for (Eigen::Index b = 0; b < s; ++b)
        h(a, b) = (*current.hessian)(static_cast<Eigen::Index>(support[a]), static_cast<Eigen::Index>(support[b]));
    }
    const Eigen::VectorXd rg = basis.transpose() * g;
    if (rg.lpNorm<Eigen::Infinity>() < 1e-15) break;
    const Eigen::MatrixXd q = basis.transpose() * h * basis;
    Eigen::LLT<Eigen::MatrixXd> llt(-q);
    if (llt.info() != Eigen::Success) break;
    const Eigen::VectorXd dir = basis * llt.solve(rg);

    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      std::vector<double> trial(theta);
      bool positive = true;
      for (Eigen::Index a = 0; a < s; ++a) {
        trial[support[a]] += t * dir(a);
        if (!(trial[support[a]] > 0.0)) positive = false;
      }
      if (!positive) continue;
      double sum = 0.0;
      for (double x : trial) sum += x;
      for (double& x : trial) x /= sum;
      auto next = ldaEvaluate(inst, trial, true, true);
      if (next.value >= current.value) {
        theta = std::move(trial);
        current = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return steps;
}

}  // namespace

void CoverConfig::validate() const {
  if (maxIters < 0) throw ValidationError("maxIters must be non-negative");
  if (!(valueTol > 0.0) || !(zeroTol > 0.0) || !(kktTol > 0.0))
    throw ValidationError("Cover tolerances must be positive");
}

std::vector<double> MaximizerReport::permutedThetaStar() const { return permute(thetaStar.coords()); }

std::vector<double> MaximizerReport::permute(std::span<const double> values) const {
  if (values.size() != permutation.size()) throw ValidationError("vector length does not match the report dimension");
  std::vector<double> out(values.size());
  for (std::size_t j = 0; j < permutation.size(); ++j) out[j] = values[permutation[j]];
  return out;
}

CoverResult coverMaximize(const LdaInstance& inst, const CoverConfig& cfg, const SimplexPoint& b0) {
  cfg.validate();
  const std::size_t k = inst.numTopics();
  if (b0.size() != k) throw ValidationError("initial point has wrong dimension");
  for (std::size_t i = 0; i < k; ++i)
    if (!(b0[i] > 0.0)) throw ValidationError("Cover's iteration needs a strictly positive starting point");

  CoverResult out;
  std::vector<double> b = b0.vec();
  auto eval = ldaEvaluate(inst, b, true, false);
  if (!std::isfinite(eval.value)) throw NumericalError("non-finite objective at the starting point; instance is corrupt");
  out.valueTrace.push_back(eval.value);

  for (int it = 0; it < cfg.maxIters; ++it) {
    const Eigen::VectorXd& a = *eval.gradient;
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      b[i] *= a(static_cast<Eigen::Index>(i));
      sum += b[i];
    }
    for (double& x : b) x /= sum;
    eval = ldaEvaluate(inst, b, true, false);
    if (!std::isfinite(eval.value)) throw NumericalError("non-finite objective during Cover iterations");
    const double gain = eval.value - out.valueTrace.back();
    out.valueTrace.push_back(eval.value);
    out.iterations = it + 1;
    if (gain < cfg.valueTol) break;
  }
  out.point = normalizedFromPositive(std::move(b));
  return out;
}

Eigen::MatrixXd criticalConeBasis(std::size_t k, std::size_t m) {
  if (k == 0 || m > k - 1) {
    std::ostringstream os;
    os << "critical-cone basis needs 0 <= m <= K-1 (K=" << k << ", m=" << m << ")";
    throw ValidationError(os.str());
  }
  const auto cols = static_cast<Eigen::Index>(k - 1 - m);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), cols);
  if (cols == 0) return u;
  u.block(static_cast<Eigen::Index>(m), 0, cols, cols).setIdentity();
  u.row(static_cast<Eigen::Index>(k - 1)).setConstant(-1.0);
  return u;
}

ReducedHessian reducedHessian(const Eigen::MatrixXd& hess, const Eigen::MatrixXd& basis) {
  if (hess.rows() != hess.cols() || hess.rows() != basis.rows())
    throw ValidationError("Hessian and basis dimensions do not conform");
  ReducedHessian out;
  Eigen::MatrixXd q = basis.transpose() * hess * basis;
  out.matrix = 0.5 * (q + q.transpose());
  if (out.matrix.size() == 0) {
    out.negativeDefinite = true;
    return out;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(-out.matrix);
  out.negativeDefinite = llt.info() == Eigen::Success;
  return out;
}

MaximizerReport kktReport(const LdaInstance& inst, const SimplexPoint& thetaStar, const CoverConfig& cfg) {
  cfg.validate();
  const std::size_t k = inst.numTopics();
  if (thetaStar.size() != k) throw ValidationError("theta* has wrong dimension");

  MaximizerReport r;
  std::vector<double> snapped = thetaStar.vec();
  for (std::size_t i = 0; i < k; ++i) {
    if (snapped[i] < cfg.zeroTol) {
      r.activeSet.push_back(i);
      snapped[i] = 0.0;
    }
  }
  r.thetaStar = normalizedFromPositive(std::move(snapped));

  auto eval = ldaEvaluate(inst, r.thetaStar.coords(), true, true);
  if (!std::isfinite(eval.value))
    throw NumericalError("objective is -inf at theta*: a word with positive frequency has zero mixture probability");
  r.hAtStar = eval.value;
  r.gradient = std::move(*eval.gradient);
  r.hessian = std::move(*eval.hessian);
  r.mu = 1.0;

  std::vector<bool> isActive(k, false);
  for (auto i : r.activeSet) isActive[i] = true;
  for (std::size_t i = 0; i < k; ++i) {
    if (isActive[i]) continue;
    r.kktResidual = std::max(r.kktResidual, std::abs(r.gradient(static_cast<Eigen::Index>(i)) - r.mu));
  }
  if (r.kktResidual > cfg.kktTol) {
    std::ostringstream os;
    os << "KKT violation: max |grad_i - 1| on the support is " << r.kktResidual << " > " << cfg.kktTol;
    throw KktViolation(os.str());
  }

  r.minLambda = kInf;
  for (auto i : r.activeSet) {
    const double lam = r.mu - r.gradient(static_cast<Eigen::Index>(i));
    if (lam < -cfg.kktTol) {
      std::ostringstream os;
      os << "KKT violation: negative multiplier " << lam << " at active coordinate " << i;
      throw KktViolation(os.str());
    }
    r.lambda.push_back(lam);
    r.minLambda = std::min(r.minLambda, lam);
  }
  r.strictComplementarity = r.activeSet.empty() || r.minLambda > cfg.kktTol;
  finishReport(r);
  return r;
}

MaximizerReport klReport(const KlObjective& obj) {
  MaximizerReport r;
  r.thetaStar = obj.thetaStar();
  const std::size_t k = r.thetaStar.size();
  r.hAtStar = obj.hAtStar();
  r.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  r.hessian = klObjectiveHessianAtStar(obj);
  r.minLambda = kInf;
  for (std::size_t i = 0; i < k; ++i) {
    if (r.thetaStar[i] > 0.0) {
      r.gradient(static_cast<Eigen::Index>(i)) = 1.0;
    } else {
      r.activeSet.push_back(i);
      r.lambda.push_back(1.0);
      r.minLambda = 1.0;
    }
  }
  finishReport(r);
  return r;
}

MaximizerResult findMaximizer(const LdaInstance& inst, const CoverConfig& cfg) {
  MaximizerResult out;
  out.cover = coverMaximize(inst, cfg, SimplexPoint::uniform(inst.numTopics()));
  std::vector<double> theta = out.cover.point.vec();
  for (double& x : theta)
    if (x < cfg.zeroTol) x = 0.0;
  out.newtonSteps = polishOnFace(inst, theta, 20);
  out.report = kktReport(inst, normalizedFromPositive(std::move(theta)), cfg);
  return out;
}

}  // namespace dirmc
