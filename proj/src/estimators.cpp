#include "dirmc/estimators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "dirmc/error.hpp"

namespace dirmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kPilotStreamBase = 1ULL << 40;

// n * h with 0 * (-inf) read as 0: at n = 0 the integrand is identically 1.
double scaled(double n, double h) { return n == 0.0 ? 0.0 : n * h; }

template <class F>
void sampleChunks(const DirichletParams& params, std::size_t count, const EstimatorConfig& cfg,
                  std::uint64_t streamBase, F&& perSample) {
  const std::size_t cs = cfg.chunkSize;
  const std::size_t chunks = (count + cs - 1) / cs;
  forEachChunk(chunks, cfg.threads, [&](std::size_t c) {
    RandomStream stream(cfg.seed, streamBase + c);
    const std::size_t lo = c * cs;
    const std::size_t hi = std::min(count, lo + cs);
    for (std::size_t i = lo; i < hi; ++i) perSample(i, sampleDirichletWithLogs(params, stream));
  });
}

struct LogMoments {
  double logMean = -kInf;
  double logSecond = -kInf;
  double logVariance = -kInf;
};

LogMoments logMoments(std::span<const double> logs) {
  LogMoments out;
  const std::size_t count = logs.size();
  if (count == 0) return out;
  const double logN = std::log(static_cast<double>(count));
  double m = -kInf;
  for (double l : logs) m = std::max(m, l);
  out.logMean = logSumExp(logs) - logN;
  if (m == -kInf) return out;
  double mean = 0.0;
  double second = 0.0;
  for (double l : logs) {
    const double x = std::exp(l - m);
    mean += x;
    second += x * x;
  }
  mean /= static_cast<double>(count);
  out.logSecond = std::log(second / static_cast<double>(count)) + 2.0 * m;
  if (count < 2) {
    out.logVariance = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double ss = 0.0;
  for (double l : logs) {
    const double d = std::exp(l - m) - mean;
    ss += d * d;
  }
  out.logVariance = std::log(ss / static_cast<double>(count - 1)) + 2.0 * m;
  return out;
}

struct PairStats {
  double shift = 0.0;
  double meanX = 0.0;
  double meanY = 0.0;
  double varX = 0.0;
  double varY = 0.0;
  double cov = 0.0;
};

// Sample moments of exp(logX - shift), exp(logY - shift).
PairStats pairStats(std::span<const double> logX, std::span<const double> logY, double shift) {
  PairStats s;
  s.shift = shift;
  const auto count = static_cast<double>(logX.size());
  for (std::size_t i = 0; i < logX.size(); ++i) {
    s.meanX += std::exp(logX[i] - shift);
    s.meanY += std::exp(logY[i] - shift);
  }
  s.meanX /= count;
  s.meanY /= count;
  for (std::size_t i = 0; i < logX.size(); ++i) {
    const double dx = std::exp(logX[i] - shift) - s.meanX;
    const double dy = std::exp(logY[i] - shift) - s.meanY;
    s.varX += dx * dx;
    s.varY += dy * dy;
    s.cov += dx * dy;
  }
  s.varX /= count - 1.0;
  s.varY /= count - 1.0;
  s.cov /= count - 1.0;
  return s;
}

double maxOf(std::span<const double> a) {
  double m = -kInf;
  for (double x : a) m = std::max(m, x);
  return m;
}

void evaluatePair(const Objective& objective, const KlObjective& kl, double n, const DirichletDraw& d, double& logY,
                  double& logX) {
  logY = scaled(n, objective.value(d.point.coords(), d.logCoords));
  logX = scaled(n, kl.value(d.point.coords(), d.logCoords));
}

}  // namespace

void EstimatorConfig::validate() const {
  if (numSamples < 2) throw ValidationError("at least two samples are required");
  if (chunkSize == 0) throw ValidationError("chunk size must be positive");
}

void EstimatorConfig::validateGamma() const {
  if (!std::isfinite(gamma) || gamma < 0.0) throw ValidationError("gamma must be a finite non-negative number");
  if (!(gamma > 0.0 && gamma < 1.0) && !allowUnstableGamma) {
    std::ostringstream os;
    os << "gamma=" << gamma << " is outside (0,1); the MSE ratio is unstable there "
       << "(pass the unstable-gamma override to run anyway)";
    throw ValidationError(os.str());
  }
  if (proposalConcentration && !(*proposalConcentration >= 0.0))
    throw ValidationError("proposal concentration must be non-negative");
}

double LogEstimate::logStdError() const {
  return 0.5 * (logVariance - std::log(static_cast<double>(numSamples)));
}

void forEachChunk(std::size_t numChunks, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1U, threads), numChunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < numChunks; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failureMutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < numChunks; c = next++) {
        try {
          fn(c);
        } catch (...) {
          std::lock_guard lock(failureMutex);
          if (!failure) failure = std::current_exception();
          next = numChunks;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

LogEstimate plainMC(const Objective& objective, const DirichletParams& alpha, double n, const EstimatorConfig& cfg) {
  cfg.validate();
  if (objective.dim() != alpha.size()) throw ValidationError("objective and alpha have different dimensions");
  if (!(n >= 0.0)) throw ValidationError("n must be non-negative");
  std::vector<double> logY(cfg.numSamples);
  sampleChunks(alpha, cfg.numSamples, cfg, 0, [&](std::size_t i, const DirichletDraw& d) {
    logY[i] = scaled(n, objective.value(d.point.coords(), d.logCoords));
  });
  const auto mom = logMoments(logY);
  LogEstimate out;
  out.logMean = mom.logMean;
  out.logSecondMoment = mom.logSecond;
  out.logVariance = mom.logVariance;
  out.n = n;
  out.numSamples = cfg.numSamples;
  out.seed = cfg.seed;
  return out;
}

DirichletParams isProposal(const DirichletParams& alpha, double n, const SimplexPoint& thetaStar,
                           const EstimatorConfig& cfg) {
  if (alpha.size() != thetaStar.size()) throw ValidationError("alpha and theta* have different dimensions");
  if (thetaStar.support().empty()) throw ValidationError("theta* has empty support");
  const double conc = cfg.proposalConcentration ? *cfg.proposalConcentration : std::pow(n, cfg.gamma);
  std::vector<double> eta(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    eta[i] = alpha[i] + conc * thetaStar[i];
    if (!(eta[i] <= kMaxProposalEntry)) {
      std::ostringstream os;
      os << "proposal parameter " << eta[i] << " exceeds " << kMaxProposalEntry;
      throw ValidationError(os.str());
    }
  }
  return DirichletParams(std::move(eta));
}

LogEstimate importanceSamplingMoment(const Objective& objective, const DirichletParams& alpha, double n,
                                     const SimplexPoint& thetaStar, const EstimatorConfig& cfg, double multiplier) {
  cfg.validate();
  cfg.validateGamma();
  if (objective.dim() != alpha.size()) throw ValidationError("objective and alpha have different dimensions");
  if (!(n >= 0.0)) throw ValidationError("n must be non-negative");
  if (cfg.truncation) {
    const auto sup = thetaStar.support();
    const auto specSup = cfg.truncation->support();
    if (!std::equal(sup.begin(), sup.end(), specSup.begin(), specSup.end()))
      throw ValidationError("truncation support does not match the support of theta*");
  }
  const DirichletParams eta = isProposal(alpha, n, thetaStar, cfg);
  const double conc = cfg.proposalConcentration ? *cfg.proposalConcentration : std::pow(n, cfg.gamma);
  // log Dir_alpha - log Dir_eta = logB(eta) - logB(alpha) - conc * theta* . log theta
  const double logRatioConst = logMultivariateBeta(eta) - logMultivariateBeta(alpha);
  const auto support = thetaStar.support();

  std::vector<double> logW(cfg.numSamples);
  std::vector<double> logTrunc(cfg.numSamples, -kInf);
  sampleChunks(eta, cfg.numSamples, cfg, 0, [&](std::size_t i, const DirichletDraw& d) {
    double dot = 0.0;
    for (auto k : support) dot += thetaStar[k] * d.logCoords[k];
    const double w = scaled(multiplier * n, objective.value(d.point.coords(), d.logCoords)) + logRatioConst -
                     (conc == 0.0 ? 0.0 : conc * dot);
    if (cfg.truncation && !inTruncatedSimplex(d.point.coords(), *cfg.truncation)) {
      logW[i] = -kInf;
      logTrunc[i] = w;
    } else {
      logW[i] = w;
    }
  });

  const auto mom = logMoments(logW);
  LogEstimate out;
  out.logMean = mom.logMean;
  out.logSecondMoment = mom.logSecond;
  out.logVariance = mom.logVariance;
  out.n = n;
  out.numSamples = cfg.numSamples;
  out.seed = cfg.seed;
  std::size_t truncated = 0;
  for (double t : logTrunc)
    if (t != -kInf) ++truncated;
  out.truncatedFraction = static_cast<double>(truncated) / static_cast<double>(cfg.numSamples);
  if (truncated > 0) out.logTruncatedMass = logSumExp(logTrunc) - std::log(static_cast<double>(cfg.numSamples));
  return out;
}

LogEstimate importanceSampling(const Objective& objective, const DirichletParams& alpha, double n,
                               const SimplexPoint& thetaStar, const EstimatorConfig& cfg) {
  return importanceSamplingMoment(objective, alpha, n, thetaStar, cfg, 1.0);
}

CvResult controlVariate(const Objective& objective, const KlObjective& kl, const DirichletParams& alpha, double n,
                        const EstimatorConfig& cfg) {
  cfg.validate();
  if (objective.dim() != alpha.size() || kl.dim() != alpha.size())
    throw ValidationError("objective, control variate and alpha dimensions differ");
  if (!(n >= 0.0)) throw ValidationError("n must be non-negative");

  CvResult out;
  out.logKnownMean = kl.logExpectation(alpha, n);

  std::size_t mainCount = cfg.numSamples;
  std::optional<double> coefficient = cfg.fixedCvCoefficient;
  if (!coefficient && cfg.cvMode == CvMode::kPilot) {
    const std::size_t pilot = std::max<std::size_t>(2, cfg.numSamples / 10);
    if (pilot + 2 > cfg.numSamples) throw ValidationError("too few samples for a pilot coefficient estimate");
    mainCount = cfg.numSamples - pilot;
    out.pilotSamples = pilot;
    std::vector<double> pY(pilot), pX(pilot);
    sampleChunks(alpha, pilot, cfg, kPilotStreamBase,
                 [&](std::size_t i, const DirichletDraw& d) { evaluatePair(objective, kl, n, d, pY[i], pX[i]); });
    const auto ps = pairStats(pX, pY, std::max({maxOf(pX), maxOf(pY), out.logKnownMean}));
    if (!(ps.varX > 0.0)) throw NumericalError("control variate has zero sample variance");
    coefficient = -ps.cov / ps.varX;
  }

  std::vector<double> logY(mainCount), logX(mainCount);
  sampleChunks(alpha, mainCount, cfg, 0,
               [&](std::size_t i, const DirichletDraw& d) { evaluatePair(objective, kl, n, d, logY[i], logX[i]); });

  const double shift = std::max({maxOf(logX), maxOf(logY), out.logKnownMean});
  const auto ps = pairStats(logX, logY, shift);
  if (!coefficient) {
    if (!(ps.varX > 0.0)) throw NumericalError("control variate has zero sample variance");
    coefficient = -ps.cov / ps.varX;
  }
  const double c = *coefficient;
  out.coefficient = c;
  out.rhoSquared = (ps.varX > 0.0 && ps.varY > 0.0) ? std::min(1.0, ps.cov * ps.cov / (ps.varX * ps.varY)) : 0.0;
  out.varianceRatio = 1.0 - out.rhoSquared;

  const double mu = std::exp(out.logKnownMean - shift);
  const double logMeanY = logSumExp(logY) - std::log(static_cast<double>(mainCount));
  const double meanX = std::exp(logSumExp(logX) - std::log(static_cast<double>(mainCount)) - shift);
  const double correction = c * (meanX - mu);

  LogEstimate& est = out.estimate;
  est.n = n;
  est.numSamples = mainCount;
  est.seed = cfg.seed;
  if (correction == 0.0) {
    est.logMean = logMeanY;
  } else {
    const double value = std::exp(logMeanY - shift) + correction;
    est.nonPositive = !(value > 0.0);
    est.logMean = std::log(std::abs(value)) + shift;
  }

  // Per-sample Z_i = Y_i + c (X_i - mu), in the shifted scale.
  double zMean = 0.0;
  double zSecond = 0.0;
  for (std::size_t i = 0; i < mainCount; ++i) {
    const double z = std::exp(logY[i] - shift) + c * (std::exp(logX[i] - shift) - mu);
    zMean += z;
    zSecond += z * z;
  }
  zMean /= static_cast<double>(mainCount);
  double ss = 0.0;
  for (std::size_t i = 0; i < mainCount; ++i) {
    const double z = std::exp(logY[i] - shift) + c * (std::exp(logX[i] - shift) - mu);
    ss += (z - zMean) * (z - zMean);
  }
  est.logSecondMoment = std::log(zSecond / static_cast<double>(mainCount)) + 2.0 * shift;
  est.logVariance = std::log(ss / static_cast<double>(mainCount - 1)) + 2.0 * shift;
  return out;
}

double weightedRhoSquared(std::span<const double> logW, std::span<const double> u, std::span<const double> v) {
  if (logW.size() != u.size() || u.size() != v.size()) throw ValidationError("correlation inputs differ in length");
  const double mw = maxOf(logW);
  if (mw == -kInf) throw NumericalError("all correlation weights vanish");
  double mu = -kInf;
  double mv = -kInf;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (logW[i] == -kInf) continue;
    mu = std::max(mu, u[i]);
    mv = std::max(mv, v[i]);
  }
  double wsum = 0.0;
  double xbar = 0.0;
  double ybar = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (logW[i] == -kInf) continue;
    const double w = std::exp(logW[i] - mw);
    wsum += w;
    xbar += w * std::exp(u[i] - mu);
    ybar += w * std::exp(v[i] - mv);
  }
  xbar /= wsum;
  ybar /= wsum;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (logW[i] == -kInf) continue;
    const double w = std::exp(logW[i] - mw);
    const double dx = std::exp(u[i] - mu) - xbar;
    const double dy = std::exp(v[i] - mv) - ybar;
    sxx += w * dx * dx;
    syy += w * dy * dy;
    sxy += w * dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw NumericalError("zero-variance input to the correlation");
  return std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
}

double empiricalRhoSquared(const Objective& objective, const KlObjective& kl, const DirichletParams& alpha, double n,
                           const EstimatorConfig& cfg, RhoSampling sampling) {
  cfg.validate();
  if (objective.dim() != alpha.size() || kl.dim() != alpha.size())
    throw ValidationError("objective, control variate and alpha dimensions differ");
  const std::size_t count = cfg.numSamples;
  std::vector<double> logW(count, 0.0), u(count), v(count);
  if (sampling == RhoSampling::kPrior) {
    sampleChunks(alpha, count, cfg, 0,
                 [&](std::size_t i, const DirichletDraw& d) { evaluatePair(objective, kl, n, d, v[i], u[i]); });
  } else {
    cfg.validateGamma();
    const SimplexPoint& ts = kl.thetaStar();
    const DirichletParams eta = isProposal(alpha, n, ts, cfg);
    const double conc = cfg.proposalConcentration ? *cfg.proposalConcentration : std::pow(n, cfg.gamma);
    const double logRatioConst = logMultivariateBeta(eta) - logMultivariateBeta(alpha);
    const auto support = ts.support();
    sampleChunks(eta, count, cfg, 0, [&](std::size_t i, const DirichletDraw& d) {
      double dot = 0.0;
      for (auto k : support) dot += ts[k] * d.logCoords[k];
      logW[i] = logRatioConst - (conc == 0.0 ? 0.0 : conc * dot);
      evaluatePair(objective, kl, n, d, v[i], u[i]);
    });
  }
  return weightedRhoSquared(logW, u, v);
}

}  // namespace dirmc
