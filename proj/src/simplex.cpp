#include "dirmc/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "dirmc/error.hpp"

namespace dirmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::mt19937_64 makeEngine(std::uint64_t seed, std::uint64_t streamIndex) {
  std::uint64_t x = seed ^ (0x6a09e667f3bcc909ULL * (streamIndex + 1));
  std::vector<std::uint32_t> words;
  words.reserve(8);
  for (int i = 0; i < 4; ++i) {
    const std::uint64_t v = splitmix64(x);
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

// ---------------------------------------------------------------------------
// SimplexPoint

SimplexPoint::SimplexPoint(std::vector<double> coords) {
  if (coords.empty()) throw ValidationError("simplex point must have at least one coordinate");
  double sum = 0.0;
  for (double c : coords) {
    if (!std::isfinite(c) || c < 0.0) {
      std::ostringstream os;
      os << "simplex coordinate " << c << " is negative or non-finite";
      throw ValidationError(os.str());
    }
    sum += c;
  }
  if (std::abs(sum - 1.0) > kRenormalizeTol) {
    std::ostringstream os;
    os.precision(17);
    os << "simplex coordinates sum to " << sum << ", outside 1e-9 of one";
    throw ValidationError(os.str());
  }
  // Sums already within the invariant tolerance are kept bit-for-bit so that
  // serialized points round-trip exactly.
  if (std::abs(sum - 1.0) > kSimplexSumTol)
    for (double& c : coords) c /= sum;
  coords_ = std::move(coords);
}

SimplexPoint SimplexPoint::vertex(std::size_t dim, std::size_t index) {
  if (index >= dim) throw ValidationError("vertex index out of range");
  std::vector<double> c(dim, 0.0);
  c[index] = 1.0;
  return SimplexPoint(std::move(c), Trusted{});
}

SimplexPoint SimplexPoint::uniform(std::size_t dim) {
  if (dim == 0) throw ValidationError("simplex dimension must be positive");
  return SimplexPoint(std::vector<double>(dim, 1.0 / static_cast<double>(dim)), Trusted{});
}

std::vector<std::size_t> SimplexPoint::support() const {
  std::vector<std::size_t> s;
  for (std::size_t i = 0; i < coords_.size(); ++i)
    if (coords_[i] > 0.0) s.push_back(i);
  return s;
}

SimplexPoint normalizedFromPositive(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw NumericalError("cannot normalize negative or non-finite weights");
    sum += w;
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) throw NumericalError("cannot normalize weights with zero or infinite sum");
  for (double& w : weights) w /= sum;
  return SimplexPoint(std::move(weights), SimplexPoint::Trusted{});
}

// ---------------------------------------------------------------------------
// DirichletParams

DirichletParams::DirichletParams(std::vector<double> alpha) : alpha_(std::move(alpha)) {
  if (alpha_.empty()) throw ValidationError("Dirichlet parameter must have at least one entry");
  for (double a : alpha_)
    if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("Dirichlet parameters must be strictly positive and finite");
}

DirichletParams DirichletParams::symmetric(std::size_t dim, double value) {
  return DirichletParams(std::vector<double>(dim, value));
}

double DirichletParams::total() const { return std::accumulate(alpha_.begin(), alpha_.end(), 0.0); }

// ---------------------------------------------------------------------------
// RandomStream

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t streamIndex)
    : seed_(seed), streamIndex_(streamIndex), engine_(makeEngine(seed, streamIndex)) {}

RandomStream RandomStream::derive(std::uint64_t childIndex) const {
  std::uint64_t x = streamIndex_ * 0x9e3779b97f4a7c15ULL + childIndex;
  return RandomStream(seed_, splitmix64(x));
}

std::uint64_t RandomStream::nextU64() { return engine_(); }

double RandomStream::uniform() {
  // 53 random bits, shifted half a step off zero.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
  // Marsaglia polar method; the second variate is discarded so that the
  // stream position depends only on the number of calls.
  for (;;) {
    const double u = 2.0 * uniform() - 1.0;
    const double v = 2.0 * uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

double RandomStream::logGamma(double shape) {
  if (!(shape > 0.0)) throw ValidationError("gamma shape must be positive");
  if (shape < 1.0) {
    const double boosted = logGamma(shape + 1.0);
    return boosted + std::log(uniform()) / shape;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

std::size_t RandomStream::uniformIndex(std::size_t bound) {
  if (bound == 0) throw ValidationError("uniformIndex bound must be positive");
  // Rejection to avoid modulo bias.
  const std::uint64_t b = bound;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % b;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return static_cast<std::size_t>(r % b);
}

// ---------------------------------------------------------------------------
// Dirichlet sampling and densities

DirichletDraw sampleDirichletWithLogs(const DirichletParams& params, RandomStream& stream) {
  const std::size_t k = params.size();
  std::vector<double> logs(k);
  for (std::size_t i = 0; i < k; ++i) logs[i] = stream.logGamma(params[i]);
  const double lse = logSumExp(logs);
  std::vector<double> coords(k);
  for (std::size_t i = 0; i < k; ++i) {
    logs[i] -= lse;
    coords[i] = std::exp(logs[i]);
  }
  return {normalizedFromPositive(std::move(coords)), std::move(logs)};
}

SimplexPoint sampleDirichlet(const DirichletParams& params, RandomStream& stream) {
  return sampleDirichletWithLogs(params, stream).point;
}

double logMultivariateBeta(std::span<const double> alpha) {
  double s = 0.0;
  double total = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0)) throw ValidationError("multivariate Beta requires positive arguments");
    s += std::lgamma(a);
    total += a;
  }
  return s - std::lgamma(total);
}

double logMultivariateBeta(const DirichletParams& params) { return logMultivariateBeta(params.values()); }

double logDirichletDensityFromLogs(const DirichletParams& params, std::span<const double> logCoords) {
  if (logCoords.size() != params.size()) throw ValidationError("dimension mismatch in Dirichlet density");
  double acc = 0.0;
  bool plusInf = false;
  bool minusInf = false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double a1 = params[i] - 1.0;
    if (a1 == 0.0) continue;
    if (std::isinf(logCoords[i]) && logCoords[i] < 0.0) {
      if (a1 < 0.0)
        plusInf = true;
      else
        minusInf = true;
      continue;
    }
    acc += a1 * logCoords[i];
  }
  if (minusInf) return -kInf;
  if (plusInf) return kInf;
  return acc - logMultivariateBeta(params);
}

double logDirichletDensity(const DirichletParams& params, const SimplexPoint& point) {
  std::vector<double> logs(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) logs[i] = point[i] > 0.0 ? std::log(point[i]) : -kInf;
  return logDirichletDensityFromLogs(params, logs);
}

// ---------------------------------------------------------------------------
// KL divergence

double klDivergenceFromLogs(const SimplexPoint& pStar, std::span<const double> logTheta) {
  if (logTheta.size() != pStar.size()) throw ValidationError("dimension mismatch in KL divergence");
  double acc = 0.0;
  for (std::size_t k = 0; k < pStar.size(); ++k) {
    const double p = pStar[k];
    if (p == 0.0) continue;
    if (std::isinf(logTheta[k]) && logTheta[k] < 0.0) return kInf;
    acc += p * (std::log(p) - logTheta[k]);
  }
  // Rounding can leave tiny negative values when theta == pStar.
  return acc;
}

double klDivergence(const SimplexPoint& pStar, const SimplexPoint& theta) {
  if (theta.size() != pStar.size()) throw ValidationError("dimension mismatch in KL divergence");
  double acc = 0.0;
  for (std::size_t k = 0; k < pStar.size(); ++k) {
    const double p = pStar[k];
    if (p == 0.0) continue;
    if (theta[k] == 0.0) return kInf;
    acc += p * std::log(p / theta[k]);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Truncation

TruncationSpec::TruncationSpec(double epsilon, TruncationMode mode, const SimplexPoint& thetaStar)
    : epsilon_(epsilon), mode_(mode), support_(thetaStar.support()) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("truncation epsilon must lie in (0, 1)");
  if (support_.empty()) throw ValidationError("truncation requires a non-empty support");
  double minSupported = 1.0;
  for (std::size_t i : support_) minSupported = std::min(minSupported, thetaStar[i]);
  if (mode == TruncationMode::kAbsolute && !(epsilon < minSupported)) {
    std::ostringstream os;
    os << "absolute truncation epsilon " << epsilon << " must be below the smallest supported coordinate "
       << minSupported << " of the maximizer";
    throw ValidationError(os.str());
  }
  thresholds_.reserve(support_.size());
  for (std::size_t i : support_)
    thresholds_.push_back(mode == TruncationMode::kAbsolute ? epsilon : epsilon * thetaStar[i]);
}

bool inTruncatedSimplex(std::span<const double> theta, const TruncationSpec& spec) {
  const auto support = spec.support();
  const auto thresholds = spec.thresholds();
  for (std::size_t j = 0; j < support.size(); ++j)
    if (theta[support[j]] < thresholds[j]) return false;
  return true;
}

bool inTruncatedSimplex(const SimplexPoint& theta, const SimplexPoint& thetaStar, const TruncationSpec& spec) {
  if (theta.size() != thetaStar.size()) throw ValidationError("dimension mismatch in truncation test");
  const auto support = thetaStar.support();
  if (!std::equal(support.begin(), support.end(), spec.support().begin(), spec.support().end()))
    throw ValidationError("truncation spec support does not match the maximizer");
  return inTruncatedSimplex(theta.coords(), spec);
}

// ---------------------------------------------------------------------------
// log-sum-exp

double logSumExp(std::span<const double> values) {
  double m = -kInf;
  for (double v : values) m = std::max(m, v);
  if (m == -kInf) return -kInf;
  if (m == kInf) return kInf;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double logAddExp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace dirmc
