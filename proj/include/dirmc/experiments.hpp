#pragma once

// Experiment drivers: MSE ratio of IS to plain MC, IS bias diagnostic, CV
// correlation against its limit, and the epsilon-sparsity sweep. Each
// (instance, n) cell runs on its own seeded streams, so cells can be spread
// over worker threads without changing any number.

#include <memory>
#include <string>
#include <vector>

#include "dirmc/estimators.hpp"
#include "dirmc/maximizer.hpp"
#include "dirmc/objectives.hpp"

namespace dirmc {

enum class ReferencePolicy { kClosedForm, kQuadrature, kHighPrecisionIS };

std::string toString(ReferencePolicy p);
ReferencePolicy referencePolicyFromString(const std::string& s);

// How the per-sample second moment of the IS estimator enters MSE_IS: the
// sample variance of its own N draws, or a separate IS run under the
// reference proposal (heavy-tailed weights make the sample variance
// underestimate at small gamma).
enum class IsMomentPolicy { kSampleVariance, kReferenceIS };

std::string toString(IsMomentPolicy p);
IsMomentPolicy isMomentPolicyFromString(const std::string& s);

// Seed for a cell, derived from (base, instance, n index, purpose).
std::uint64_t cellSeed(std::uint64_t base, std::size_t instance, std::size_t nIndex, std::uint64_t purpose);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Least-squares line through (x, y).
LinearFit fitLine(std::span<const double> x, std::span<const double> y);

inline constexpr std::size_t kSlopeWindow = 5;
inline constexpr double kBiasFloor = 1e-300;

struct MseSettings {
  std::vector<double> nGrid;
  double gamma = 0.9;
  double epsilon = 0.1;
  TruncationMode mode = TruncationMode::kRelative;
  std::size_t numSamplesIS = 10000;
  std::size_t numSamplesMC = 10000;
  // IS run (gamma 0.9, epsilon 0.1) estimating the plain-MC second moment.
  std::size_t referenceSamples = 10000;
  double referenceGamma = 0.9;
  double referenceEpsilon = 0.1;
  ReferencePolicy policy = ReferencePolicy::kHighPrecisionIS;
  IsMomentPolicy isMoment = IsMomentPolicy::kReferenceIS;
  std::uint64_t seed = 0;
  std::size_t chunkSize = 4096;
  bool allowUnstableGamma = false;
};

struct MsePoint {
  double n = 0.0;
  double logMseIS = 0.0;
  double logMseMC = 0.0;
  double logMseRatio = 0.0;
  double logBiasSq = 0.0;          // -inf when no sample was truncated
  bool zeroBias = false;
  double logBiasRatio = 0.0;       // log(Bias^2 / MSE_MC), floored at log(1e-300)
  double truncatedFraction = 0.0;
  LogEstimate is;
  double logMcSecondMoment = 0.0;
  double logIsSecondMoment = 0.0;  // per-sample second moment of the IS estimator
  double logIsVarianceSample = 0.0;  // sample variance of the IS draws, for comparison
  double logReference = 0.0;       // reference value of log I(n)
  std::string policy;
};

struct MseExperimentResult {
  std::vector<double> nGrid;
  std::vector<double> logMseRatio;
  double fittedSlope = 0.0;
  double fittedIntercept = 0.0;
  double theoreticalSlope = 0.0;
  std::size_t interceptFitWindow = kSlopeWindow;
  std::vector<MsePoint> points;
};

// Reference values log I(n) and log E[exp(2nH)] under a policy.
struct ReferenceMoments {
  double logFirst = 0.0;
  double logSecond = 0.0;
  std::string policy;
};

ReferenceMoments referenceMoments(const Objective& objective, const MaximizerReport& report,
                                  const DirichletParams& alpha, double n, const MseSettings& s, std::uint64_t seed);

// One IS point against precomputed reference moments.
MsePoint msePoint(const Objective& objective, const MaximizerReport& report, const DirichletParams& alpha, double n,
                  const MseSettings& s, const ReferenceMoments& ref, std::uint64_t seed);

// log E_q[(w exp(nH) 1_trunc)^2] for the IS proposal q of `s`, estimated as
// B(eta)/B(alpha) E_alpha[exp(2nH - c theta*.log theta) 1_trunc] under the
// reference proposal (c = n^gamma, eta = alpha + c theta*).
double isSecondMomentReference(const Objective& objective, const MaximizerReport& report,
                               const DirichletParams& alpha, double n, const MseSettings& s, std::uint64_t seed);

double theoreticalMseSlope(const MaximizerReport& report, const DirichletParams& alpha, double gamma);

// Slope over the five largest n; needs at least five grid points.
MseExperimentResult mseRatioExperiment(const Objective& objective, const MaximizerReport& report,
                                       const DirichletParams& alpha, const MseSettings& s);

// Per-n log(Bias^2 / MSE_MC) with the 1e-300 floor for untruncated runs.
std::vector<MsePoint> biasDiagnostic(const Objective& objective, const MaximizerReport& report,
                                     const DirichletParams& alpha, const MseSettings& s);

// ----------------------------------------------------------------------------
// Batch experiments over instance sets, emitting long-format rows.

struct ExperimentRow {
  std::string instanceId;
  double n = 0.0;
  std::string quantity;
  double value = 0.0;
  std::string referencePolicy;
};

struct SummaryStat {
  std::string quantity;
  double n = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

// Median / quartiles (linear interpolation) per (quantity, n), in order of
// first appearance.
std::vector<SummaryStat> summarize(const std::vector<ExperimentRow>& rows);
double quantile(std::vector<double> values, double q);

struct PreparedInstance {
  std::string id;
  std::shared_ptr<const LdaInstance> instance;
  MaximizerReport report;
};

struct BatchMseResult {
  std::vector<ExperimentRow> rows;
  std::vector<MseExperimentResult> perInstance;
  double medianFittedSlope = 0.0;
  double theoreticalSlope = 0.0;
};

// Runs mseRatioExperiment on every instance (cells spread over threads).
BatchMseResult runMseBatch(const std::vector<PreparedInstance>& instances, const DirichletParams& alpha,
                           const MseSettings& s, unsigned threads);

struct BatchBiasResult {
  std::vector<ExperimentRow> rows;
  std::vector<double> medianLogBiasRatio;   // per n
  std::vector<double> zeroTruncationFraction;  // per n
  std::vector<double> meanLogBiasRatio;        // per n, floor included
};

BatchBiasResult runBiasBatch(const std::vector<PreparedInstance>& instances, const DirichletParams& alpha,
                             const MseSettings& s, unsigned threads);

struct CorrelationSettings {
  std::vector<double> nGrid;
  std::size_t numSamples = 10000;
  double gamma = 0.9;
  RhoSampling sampling = RhoSampling::kImportance;
  std::uint64_t seed = 0;
  std::size_t chunkSize = 4096;
};

struct BatchCorrelationResult {
  std::vector<ExperimentRow> rows;       // rho_hat_sq, rho_sq_limit, log_ratio
  std::vector<double> medianAbsLogRatio;  // per n
  std::vector<double> medianLogRatio;     // per n
};

BatchCorrelationResult runCorrelationBatch(const std::vector<PreparedInstance>& instances,
                                           const DirichletParams& alpha, const CorrelationSettings& s,
                                           unsigned threads);

struct SparsitySettings {
  std::size_t K = 10;
  std::size_t V = 1000;
  double n = 1000.0;
  std::vector<double> epsilonGrid;
  std::size_t runsPerEpsilon = 10;
  std::size_t numSamples = 10000;
  double gamma = 0.9;
  double alpha = 0.1;          // prior of the estimated integral
  double documentAlpha = 1.0;  // prior of the topic proportions generating each document
  std::size_t documentAttempts = 20;  // documents drawn per phi until one has an interior maximizer
  std::uint64_t seed = 0;
  std::size_t chunkSize = 4096;
};

struct SparsityRun {
  double targetEpsilon = 0.0;
  double measuredEpsilon = 0.0;
  double epsilonZero = 0.0;
  bool applicable = false;
  double lowerBound = 0.0;          // proof form, when applicable
  double lowerBoundTheorem = 0.0;   // stated form, when applicable
  double rhoLimit = 0.0;
  double rhoHat = 0.0;
  bool interior = false;  // false when no drawn document had an interior maximizer
};

struct BatchSparsityResult {
  std::vector<ExperimentRow> rows;
  std::vector<SparsityRun> runs;
  std::vector<double> meanRhoHat;  // per epsilon
  double spearman = 0.0;           // Spearman(epsilon, mean rho_hat)
};

BatchSparsityResult runSparsityBatch(const SparsitySettings& s, unsigned threads);

// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace dirmc
