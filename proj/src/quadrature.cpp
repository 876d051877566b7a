#include "dirmc/quadrature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "dirmc/error.hpp"

namespace dirmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Streaming log-sum-exp.
struct LogAccumulator {
  double max = -kInf;
  double sum = 0.0;

  void add(double x) {
    if (x == -kInf || std::isnan(x)) return;
    if (x <= max) {
      sum += std::exp(x - max);
    } else {
      sum = sum * std::exp(max - x) + 1.0;
      max = x;
    }
  }
  double value() const { return max == -kInf ? -kInf : max + std::log(sum); }
};

struct AxisNode {
  double y;
  double oneMinusY;
  double logW;  // log of y^ea (1-y)^eb dy times the rule weight
};

class RuleCache {
 public:
  const GaussRule& get(std::size_t points, double a, double b) {
    auto key = std::make_tuple(points, a, b);
    auto it = rules_.find(key);
    if (it == rules_.end()) it = rules_.emplace(key, gaussJacobi(points, a, b)).first;
    return it->second;
  }

 private:
  std::map<std::tuple<std::size_t, double, double>, GaussRule> rules_;
};

std::vector<double> breakpoints(double peak, double scale) {
  std::set<double> pts{0.0, 1.0};
  if (peak > 0.0 && peak < 1.0) pts.insert(peak);
  for (double w = scale; w < 1.0; w *= 2.0) {
    if (peak - w > 0.0) pts.insert(peak - w);
    if (peak + w < 1.0) pts.insert(peak + w);
  }
  return {pts.begin(), pts.end()};
}

// Nodes for the integral over [0,1] of f(y) y^ea (1-y)^eb dy.
std::vector<AxisNode> axisNodes(const std::vector<double>& bp, double ea, double eb, std::size_t points,
                                RuleCache& cache) {
  std::vector<AxisNode> out;
  for (std::size_t p = 0; p + 1 < bp.size(); ++p) {
    const double c = bp[p];
    const double d = bp[p + 1];
    const bool left = c == 0.0;
    const bool right = d == 1.0;
    const double half = 0.5 * (d - c);
    // Jacobi parameters: a multiplies (1-x), b multiplies (1+x).
    const double ja = right ? eb : 0.0;
    const double jb = left ? ea : 0.0;
    const GaussRule& rule = cache.get(points, ja, jb);
    double logFactor = std::log(half);
    if (left) logFactor += ea * std::log(half);
    if (right) logFactor += eb * std::log(half);
    for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
      const double x = rule.nodes[j];
      AxisNode node;
      node.y = c + half * (1.0 + x);
      node.oneMinusY = (1.0 - d) + half * (1.0 - x);
      node.logW = rule.logWeights[j] + logFactor;
      if (!left && ea != 0.0) node.logW += ea * std::log(node.y);
      if (!right && eb != 0.0) node.logW += eb * std::log(node.oneMinusY);
      out.push_back(node);
    }
  }
  return out;
}

double evalObjective(const Objective& obj, std::vector<double>& theta, std::vector<double>& logTheta) {
  return obj.value(theta, logTheta);
}

SimplexPoint gridPeak(const Objective& obj) {
  const std::size_t k = obj.dim();
  std::vector<double> theta(k), logs(k);
  double best = -kInf;
  std::vector<double> arg(k, 1.0 / static_cast<double>(k));
  auto consider = [&] {
    for (std::size_t i = 0; i < k; ++i) logs[i] = theta[i] > 0.0 ? std::log(theta[i]) : -kInf;
    const double v = obj.value(theta, logs);
    if (v > best) {
      best = v;
      arg = theta;
    }
  };
  if (k == 1) return SimplexPoint::uniform(1);
  if (k == 2) {
    const int g = 4000;
    for (int i = 0; i <= g; ++i) {
      theta[0] = static_cast<double>(i) / g;
      theta[1] = static_cast<double>(g - i) / g;
      consider();
    }
  } else {
    const int g = 300;
    for (int i = 0; i <= g; ++i)
      for (int j = 0; i + j <= g; ++j) {
        theta[0] = static_cast<double>(i) / g;
        theta[1] = static_cast<double>(j) / g;
        theta[2] = static_cast<double>(g - i - j) / g;
        consider();
      }
  }
  return normalizedFromPositive(arg);
}

double integrate(const Objective& obj, const DirichletParams& alpha, double scaleN, const SimplexPoint& peak,
                 std::size_t points, RuleCache& cache, std::size_t& panels) {
  const std::size_t k = alpha.size();
  const double scale = 0.25 / (scaleN + 1.0);
  const double logB = logMultivariateBeta(alpha);
  auto term = [&](double h) { return scaleN == 0.0 ? 0.0 : scaleN * h; };
  LogAccumulator acc;
  std::vector<double> theta(k), logs(k);

  if (k == 1) return 0.0;
  if (k == 2) {
    const auto bp = breakpoints(peak[0], scale);
    panels = bp.size() - 1;
    for (const auto& node : axisNodes(bp, alpha[0] - 1.0, alpha[1] - 1.0, points, cache)) {
      theta = {node.y, node.oneMinusY};
      logs = {std::log(node.y), std::log(node.oneMinusY)};
      acc.add(node.logW + term(evalObjective(obj, theta, logs)));
    }
    return acc.value() - logB;
  }

  // theta = (u, (1-u) v, (1-u)(1-v)), Jacobian (1-u).
  const double u0 = peak[0];
  const double rest = peak[1] + peak[2];
  const double v0 = rest > 0.0 ? peak[1] / rest : 0.5;
  const auto bu = breakpoints(u0, scale);
  const auto bv = breakpoints(v0, scale);
  panels = std::max(bu.size(), bv.size()) - 1;
  const auto un = axisNodes(bu, alpha[0] - 1.0, alpha[1] + alpha[2] - 1.0, points, cache);
  const auto vn = axisNodes(bv, alpha[1] - 1.0, alpha[2] - 1.0, points, cache);
  for (const auto& a : un) {
    const double lu = std::log(a.y);
    const double l1u = std::log(a.oneMinusY);
    for (const auto& b : vn) {
      theta = {a.y, a.oneMinusY * b.y, a.oneMinusY * b.oneMinusY};
      logs = {lu, l1u + std::log(b.y), l1u + std::log(b.oneMinusY)};
      acc.add(a.logW + b.logW + term(evalObjective(obj, theta, logs)));
    }
  }
  return acc.value() - logB;
}

}  // namespace

GaussRule gaussJacobi(std::size_t points, double a, double b) {
  if (points == 0) throw ValidationError("Gauss-Jacobi rule needs at least one node");
  if (!(a > -1.0) || !(b > -1.0)) throw ValidationError("Gauss-Jacobi exponents must exceed -1");
  const auto n = static_cast<Eigen::Index>(points);
  Eigen::VectorXd diag(n);
  Eigen::VectorXd sub(std::max<Eigen::Index>(n - 1, 0));
  const double ab = a + b;
  diag(0) = (b - a) / (ab + 2.0);
  for (Eigen::Index k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    const double s = 2.0 * kk + ab;
    diag(k) = (b * b - a * a) / (s * (s + 2.0));
  }
  for (Eigen::Index k = 1; k < n; ++k) {
    const double kk = static_cast<double>(k);
    const double s = 2.0 * kk + ab;
    double beta;
    if (k == 1) {
      beta = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
    } else {
      beta = 4.0 * kk * (kk + a) * (kk + b) * (kk + ab) / (s * s * (s + 1.0) * (s - 1.0));
    }
    sub(k - 1) = std::sqrt(beta);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (eig.info() != Eigen::Success) throw NumericalError("Golub-Welsch eigenvalue problem failed");
  const double logMu0 = (ab + 1.0) * std::numbers::ln2 + std::lgamma(a + 1.0) + std::lgamma(b + 1.0) -
                        std::lgamma(ab + 2.0);
  GaussRule rule;
  rule.nodes.resize(points);
  rule.logWeights.resize(points);
  for (Eigen::Index j = 0; j < n; ++j) {
    rule.nodes[static_cast<std::size_t>(j)] = std::clamp(eig.eigenvalues()(j), -1.0, 1.0);
    const double v0 = eig.eigenvectors()(0, j);
    rule.logWeights[static_cast<std::size_t>(j)] = logMu0 + 2.0 * std::log(std::abs(v0));
  }
  return rule;
}

QuadratureResult quadratureReference(const Objective& objective, const DirichletParams& alpha, double n,
                                     int multiplier, const QuadratureOptions& options) {
  const std::size_t k = alpha.size();
  if (objective.dim() != k) throw ValidationError("objective and alpha have different dimensions");
  if (k > 3) {
    std::ostringstream os;
    os << "quadrature reference supports K <= 3, got K=" << k;
    throw ValidationError(os.str());
  }
  if (multiplier != 1 && multiplier != 2) throw ValidationError("exponent multiplier must be 1 or 2");
  if (!(n >= 0.0)) throw ValidationError("n must be non-negative");
  if (options.nodes < 2) throw ValidationError("quadrature needs at least two nodes per panel");
  if (options.peak && options.peak->size() != k) throw ValidationError("peak has wrong dimension");

  const SimplexPoint peak = options.peak ? *options.peak : gridPeak(objective);
  const double scaleN = static_cast<double>(multiplier) * n;
  RuleCache cache;
  QuadratureResult out;
  const double coarse = integrate(objective, alpha, scaleN, peak, options.nodes, cache, out.panelsPerAxis);
  const double fine = integrate(objective, alpha, scaleN, peak, 2 * options.nodes, cache, out.panelsPerAxis);
  out.logValue = fine;
  out.errorEstimate = std::abs(fine - coarse);
  out.converged = std::isfinite(fine) && out.errorEstimate < options.tolerance;
  return out;
}

}  // namespace dirmc
