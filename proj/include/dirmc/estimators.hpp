#pragma once

// Log-space estimators of I(n) = E_{Dir(alpha)}[exp(n H(theta))]: plain Monte
// Carlo, gamma-importance sampling with truncation, and the KL control
// variate. Sampling is split into fixed-size chunks, chunk c drawing from
// RandomStream(seed, c); per-sample values are reduced sequentially, so
// results do not depend on the number of worker threads.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>

#include "dirmc/objectives.hpp"
#include "dirmc/simplex.hpp"

namespace dirmc {

enum class CvMode { kPooled, kPilot };

struct EstimatorConfig {
  std::size_t numSamples = 10000;
  std::uint64_t seed = 0;
  double gamma = 0.9;
  std::optional<TruncationSpec> truncation;  // importance sampling only
  CvMode cvMode = CvMode::kPooled;
  std::size_t chunkSize = 4096;
  unsigned threads = 1;
  bool allowUnstableGamma = false;
  // Replaces n^gamma in the proposal alpha + n^gamma theta*.
  std::optional<double> proposalConcentration;
  // Forces the control-variate coefficient instead of estimating it.
  std::optional<double> fixedCvCoefficient;

  void validate() const;
  void validateGamma() const;
};

inline constexpr double kMaxProposalEntry = 1e12;

struct LogEstimate {
  double logMean = 0.0;
  double logSecondMoment = 0.0;  // per sample
  double logVariance = 0.0;      // per sample, N - 1 denominator
  double n = 0.0;
  std::size_t numSamples = 0;
  double truncatedFraction = 0.0;
  // log of (1/N) sum of the weights of truncated samples; -inf when none.
  double logTruncatedMass = -std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  // The control-variate estimate can be non-positive; logMean then holds
  // log|estimate|.
  bool nonPositive = false;

  // log of the standard error of the mean
  double logStdError() const;
};

struct CvResult {
  LogEstimate estimate;
  double coefficient = 0.0;
  double rhoSquared = 0.0;      // empirical squared correlation of the pair
  double varianceRatio = 1.0;   // 1 - rhoSquared
  double logKnownMean = 0.0;    // log E[exp(n Hhat)] from the Beta closed form
  std::size_t pilotSamples = 0;
};

// Runs fn(chunkIndex) for every chunk on up to `threads` workers.
void forEachChunk(std::size_t numChunks, unsigned threads, const std::function<void(std::size_t)>& fn);

LogEstimate plainMC(const Objective& objective, const DirichletParams& alpha, double n, const EstimatorConfig& cfg);

// Proposal parameters alpha + c theta*, c = n^gamma unless overridden.
DirichletParams isProposal(const DirichletParams& alpha, double n, const SimplexPoint& thetaStar,
                           const EstimatorConfig& cfg);

// IS estimate of E[exp(multiplier * n * H)]; multiplier 1 is the estimator of
// I(n), multiplier 2 gives the plain-MC second moment.
LogEstimate importanceSamplingMoment(const Objective& objective, const DirichletParams& alpha, double n,
                                     const SimplexPoint& thetaStar, const EstimatorConfig& cfg, double multiplier);

LogEstimate importanceSampling(const Objective& objective, const DirichletParams& alpha, double n,
                               const SimplexPoint& thetaStar, const EstimatorConfig& cfg);

CvResult controlVariate(const Objective& objective, const KlObjective& kl, const DirichletParams& alpha, double n,
                        const EstimatorConfig& cfg);

enum class RhoSampling { kPrior, kImportance };

// Squared correlation of exp(nH) and exp(n Hhat) under Dir(alpha), either
// from prior draws or self-normalized with likelihood-ratio weights under
// the IS proposal.
double empiricalRhoSquared(const Objective& objective, const KlObjective& kl, const DirichletParams& alpha, double n,
                           const EstimatorConfig& cfg, RhoSampling sampling);

// Weighted squared correlation of exp(u) and exp(v) with log-weights logW
// (-inf entries ignored). Exposed for tests.
double weightedRhoSquared(std::span<const double> logW, std::span<const double> u, std::span<const double> v);

}  // namespace dirmc
