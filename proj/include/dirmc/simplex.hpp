#pragma once

// Simplex geometry, Dirichlet sampling and densities, KL divergence and the
// seeded random stream shared by every estimator.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace dirmc {

inline constexpr double kSimplexSumTol = 1e-12;
inline constexpr double kRenormalizeTol = 1e-9;

// Non-negative vector summing to one.
class SimplexPoint {
 public:
  SimplexPoint() = default;

  // Validates and renormalizes. Inputs whose sum is off by more than 1e-9, or
  // that carry negative / non-finite entries, are rejected.
  explicit SimplexPoint(std::vector<double> coords);

  // Point with all mass on `index`.
  static SimplexPoint vertex(std::size_t dim, std::size_t index);
  static SimplexPoint uniform(std::size_t dim);

  std::size_t size() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  std::span<const double> coords() const { return coords_; }
  const std::vector<double>& vec() const { return coords_; }

  // Indices with strictly positive mass.
  std::vector<std::size_t> support() const;

  bool operator==(const SimplexPoint&) const = default;

 private:
  struct Trusted {};
  SimplexPoint(std::vector<double> coords, Trusted) : coords_(std::move(coords)) {}
  friend SimplexPoint normalizedFromPositive(std::vector<double>);

  std::vector<double> coords_;
};

// Divides a non-negative vector with positive sum by its sum. No tolerance
// check on the input sum.
SimplexPoint normalizedFromPositive(std::vector<double> weights);

// Strictly positive Dirichlet parameter vector.
class DirichletParams {
 public:
  DirichletParams() = default;
  explicit DirichletParams(std::vector<double> alpha);
  static DirichletParams symmetric(std::size_t dim, double value);

  std::size_t size() const { return alpha_.size(); }
  double operator[](std::size_t i) const { return alpha_[i]; }
  std::span<const double> values() const { return alpha_; }
  const std::vector<double>& vec() const { return alpha_; }
  double total() const;

 private:
  std::vector<double> alpha_;
};

// Deterministic random stream keyed by (seed, stream index). Identical keys
// reproduce identical draws on every platform: the engine is mt19937_64 and
// every distribution below is implemented here rather than taken from
// <random>, whose distributions are implementation-defined.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t streamIndex = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t streamIndex() const { return streamIndex_; }

  // Independent child stream; children of distinct indices do not overlap.
  RandomStream derive(std::uint64_t childIndex) const;

  std::uint64_t nextU64();
  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  // log of a Gamma(shape, 1) variate. Marsaglia-Tsang for shape >= 1, the
  // U^(1/shape) boost for shape < 1; kept in log-space so small shapes do not
  // underflow.
  double logGamma(double shape);
  std::size_t uniformIndex(std::size_t bound);

 private:
  std::uint64_t seed_;
  std::uint64_t streamIndex_;
  std::mt19937_64 engine_;
};

// A Dirichlet draw with its coordinates also available in log-space (for
// coordinates too small to represent, log-coordinates remain finite).
struct DirichletDraw {
  SimplexPoint point;
  std::vector<double> logCoords;
};

DirichletDraw sampleDirichletWithLogs(const DirichletParams& params, RandomStream& stream);
SimplexPoint sampleDirichlet(const DirichletParams& params, RandomStream& stream);

// sum_i log Gamma(alpha_i) - log Gamma(sum_i alpha_i)
double logMultivariateBeta(std::span<const double> alpha);
double logMultivariateBeta(const DirichletParams& params);

// log Dir_alpha(theta) with extended-real conventions on faces: theta_i = 0
// gives +inf if alpha_i < 1, -inf if alpha_i > 1 and contributes 0 if
// alpha_i == 1 (mixed signs resolve to -inf).
double logDirichletDensity(const DirichletParams& params, const SimplexPoint& point);
// Same, from log-coordinates (-inf marks an exact zero).
double logDirichletDensityFromLogs(const DirichletParams& params, std::span<const double> logCoords);

// KL(pStar | theta) with 0 log 0 = 0 and 0 log inf = 0.
double klDivergence(const SimplexPoint& pStar, const SimplexPoint& theta);
double klDivergenceFromLogs(const SimplexPoint& pStar, std::span<const double> logTheta);

enum class TruncationMode { kAbsolute, kRelative };

// Truncated simplex: theta_i >= eps (absolute) or theta_i >= eps * thetaStar_i
// (relative) on the support of thetaStar.
class TruncationSpec {
 public:
  TruncationSpec(double epsilon, TruncationMode mode, const SimplexPoint& thetaStar);

  double epsilon() const { return epsilon_; }
  TruncationMode mode() const { return mode_; }
  std::span<const std::size_t> support() const { return support_; }

  // Per-coordinate lower bounds on the support, in the order of support().
  std::span<const double> thresholds() const { return thresholds_; }

 private:
  double epsilon_;
  TruncationMode mode_;
  std::vector<std::size_t> support_;
  std::vector<double> thresholds_;
};

bool inTruncatedSimplex(const SimplexPoint& theta, const SimplexPoint& thetaStar, const TruncationSpec& spec);
// Fast path used by the estimators; thetaStar is implied by the spec.
bool inTruncatedSimplex(std::span<const double> theta, const TruncationSpec& spec);

// Numerically stable log(sum exp(x_i)); -inf for empty input or all -inf.
double logSumExp(std::span<const double> values);
// log(exp(a) + exp(b))
double logAddExp(double a, double b);

}  // namespace dirmc
