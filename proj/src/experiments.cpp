#include "dirmc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dirmc/error.hpp"
#include "dirmc/instances.hpp"
#include "dirmc/laplace.hpp"
#include "dirmc/quadrature.hpp"

namespace dirmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Purposes keep the streams of one cell apart.
constexpr std::uint64_t kPurposeIS = 0;
constexpr std::uint64_t kPurposeSecondMoment = 1;
constexpr std::uint64_t kPurposeFirstMoment = 2;
constexpr std::uint64_t kPurposeCorrelation = 3;
constexpr std::uint64_t kPurposeSparsity = 4;
constexpr std::uint64_t kPurposeIsMoment = 5;


void requireGrid(const std::vector<double>& grid) {
  if (grid.empty()) throw ValidationError("n-grid is empty");
  for (double n : grid)
    if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("n-grid entries must be positive");
}

// log(exp(a) - exp(b)) for a > b; NaN otherwise.
double logSubExp(double a, double b) {
  if (!(a > b)) return std::numeric_limits<double>::quiet_NaN();
  if (b == -kInf) return a;
  return a + std::log1p(-std::exp(b - a));
}

struct CellResult {
  MsePoint point;
};

std::vector<CellResult> runMseCells(const std::vector<PreparedInstance>& instances, const DirichletParams& alpha,
                                    const MseSettings& s, unsigned threads) {
  requireGrid(s.nGrid);
  const std::size_t cellsPerInstance = s.nGrid.size();
  std::vector<CellResult> cells(instances.size() * cellsPerInstance);
  forEachChunk(cells.size(), threads, [&](std::size_t c) {
    const std::size_t i = c / cellsPerInstance;
    const std::size_t j = c % cellsPerInstance;
    const LdaObjective obj(instances[i].instance);
    const double n = s.nGrid[j];
    const auto ref = referenceMoments(obj, instances[i].report, alpha, n, s, cellSeed(s.seed, i, j, kPurposeSecondMoment));
    cells[c].point = msePoint(obj, instances[i].report, alpha, n, s, ref, cellSeed(s.seed, i, j, kPurposeIS));
  });
  return cells;
}

std::vector<double> averageRanks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::string toString(ReferencePolicy p) {
  switch (p) {
    case ReferencePolicy::kClosedForm: return "closed_form";
    case ReferencePolicy::kQuadrature: return "quadrature";
    case ReferencePolicy::kHighPrecisionIS: return "high_precision_is";
  }
  return "unknown";
}

ReferencePolicy referencePolicyFromString(const std::string& s) {
  if (s == "closed_form" || s == "closed-form") return ReferencePolicy::kClosedForm;
  if (s == "quadrature") return ReferencePolicy::kQuadrature;
  if (s == "high_precision_is" || s == "high-precision-is" || s == "is") return ReferencePolicy::kHighPrecisionIS;
  throw ValidationError("unknown reference policy \"" + s + "\"");
}

std::string toString(IsMomentPolicy p) {
  return p == IsMomentPolicy::kSampleVariance ? "sample_variance" : "reference_is";
}

IsMomentPolicy isMomentPolicyFromString(const std::string& s) {
  if (s == "sample_variance") return IsMomentPolicy::kSampleVariance;
  if (s == "reference_is") return IsMomentPolicy::kReferenceIS;
  throw ValidationError("unknown IS moment policy '" + s + "' (sample_variance or reference_is)");
}

std::uint64_t cellSeed(std::uint64_t base, std::size_t instance, std::size_t nIndex, std::uint64_t purpose) {
  RandomStream a(base, instance);
  RandomStream b(a.nextU64(), nIndex);
  RandomStream c(b.nextU64(), purpose);
  return c.nextU64();
}

LinearFit fitLine(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("line fit needs at least two points");
  const double nn = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nn;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nn;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("line fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

ReferenceMoments referenceMoments(const Objective& objective, const MaximizerReport& report,
                                  const DirichletParams& alpha, double n, const MseSettings& s, std::uint64_t seed) {
  ReferenceMoments ref;
  ref.policy = toString(s.policy);
  switch (s.policy) {
    case ReferencePolicy::kClosedForm: {
      const auto* kl = dynamic_cast<const KlObjective*>(&objective);
      if (!kl) throw ValidationError("the closed-form reference is only available for the KL objective");
      ref.logFirst = kl->logExpectation(alpha, n);
      ref.logSecond = kl->logExpectation(alpha, 2.0 * n);
      break;
    }
    case ReferencePolicy::kQuadrature: {
      QuadratureOptions qo;
      qo.peak = report.thetaStar;
      const auto first = quadratureReference(objective, alpha, n, 1, qo);
      const auto second = quadratureReference(objective, alpha, n, 2, qo);
      if (!first.converged || !second.converged) throw NumericalError("quadrature reference did not converge");
      ref.logFirst = first.logValue;
      ref.logSecond = second.logValue;
      break;
    }
    case ReferencePolicy::kHighPrecisionIS: {
      EstimatorConfig cfg;
      cfg.numSamples = s.referenceSamples;
      cfg.gamma = s.referenceGamma;
      cfg.chunkSize = s.chunkSize;
      cfg.truncation.emplace(s.referenceEpsilon, TruncationMode::kRelative, report.thetaStar);
      cfg.seed = seed;
      ref.logSecond = importanceSamplingMoment(objective, alpha, n, report.thetaStar, cfg, 2.0).logMean;
      RandomStream r(seed, kPurposeFirstMoment);
      cfg.seed = r.nextU64();
      ref.logFirst = importanceSamplingMoment(objective, alpha, n, report.thetaStar, cfg, 1.0).logMean;
      break;
    }
  }
  return ref;
}

double isSecondMomentReference(const Objective& objective, const MaximizerReport& report,
                               const DirichletParams& alpha, double n, const MseSettings& s, std::uint64_t seed) {
  if (!(n > 0.0)) throw ValidationError("n must be positive");
  EstimatorConfig target;
  target.gamma = s.gamma;
  target.allowUnstableGamma = s.allowUnstableGamma;
  target.validateGamma();
  const DirichletParams eta = isProposal(alpha, n, report.thetaStar, target);
  const double c = std::pow(n, s.gamma);
  const auto support = report.thetaStar.support();
  const auto& ts = report.thetaStar;
  const FunctionObjective integrand(objective.dim(), [&](std::span<const double> t, std::span<const double> lt) {
    double cross = 0.0;
    for (auto i : support) cross += ts[i] * lt[i];
    return 2.0 * objective.value(t, lt) - (c / n) * cross;
  });
  EstimatorConfig cfg;
  cfg.numSamples = s.referenceSamples;
  cfg.gamma = s.referenceGamma;
  cfg.chunkSize = s.chunkSize;
  cfg.truncation.emplace(s.epsilon, s.mode, report.thetaStar);
  cfg.seed = seed;
  const double logE = importanceSamplingMoment(integrand, alpha, n, report.thetaStar, cfg, 1.0).logMean;
  return logE + logMultivariateBeta(eta) - logMultivariateBeta(alpha);
}

MsePoint msePoint(const Objective& objective, const MaximizerReport& report, const DirichletParams& alpha, double n,
                  const MseSettings& s, const ReferenceMoments& ref, std::uint64_t seed) {
  EstimatorConfig cfg;
  cfg.numSamples = s.numSamplesIS;
  cfg.gamma = s.gamma;
  cfg.chunkSize = s.chunkSize;
  cfg.allowUnstableGamma = s.allowUnstableGamma;
  cfg.truncation.emplace(s.epsilon, s.mode, report.thetaStar);
  cfg.seed = seed;

  MsePoint pt;
  pt.n = n;
  pt.is = importanceSampling(objective, alpha, n, report.thetaStar, cfg);
  pt.truncatedFraction = pt.is.truncatedFraction;
  pt.logReference = ref.logFirst;
  pt.logMcSecondMoment = ref.logSecond;
  pt.policy = "mc_moments=" + ref.policy + ";is_moment=" + toString(s.isMoment) + ";bias=truncated_mass";

  pt.zeroBias = pt.is.logTruncatedMass == -kInf;
  pt.logBiasSq = 2.0 * pt.is.logTruncatedMass;
  const double logVarMC = logSubExp(ref.logSecond, 2.0 * ref.logFirst);
  pt.logMseMC = logVarMC - std::log(static_cast<double>(s.numSamplesMC));
  pt.logIsVarianceSample = pt.is.logVariance;
  pt.logIsSecondMoment = pt.is.logSecondMoment;
  double logVarIS = pt.is.logVariance;
  if (s.isMoment == IsMomentPolicy::kReferenceIS) {
    RandomStream r(seed, kPurposeIsMoment);
    pt.logIsSecondMoment = isSecondMomentReference(objective, report, alpha, n, s, r.nextU64());
    logVarIS = logSubExp(pt.logIsSecondMoment, 2.0 * pt.is.logMean);
    if (std::isnan(logVarIS))
      throw NumericalError("reference IS second moment does not exceed the squared mean; raise the reference sample count");
  }
  pt.logMseIS = logAddExp(logVarIS - std::log(static_cast<double>(s.numSamplesIS)), pt.logBiasSq);
  pt.logMseRatio = pt.logMseIS - pt.logMseMC;
  const double floor = std::log(kBiasFloor);
  pt.logBiasRatio = pt.zeroBias ? floor : std::max(floor, pt.logBiasSq - pt.logMseMC);
  return pt;
}

double theoreticalMseSlope(const MaximizerReport& report, const DirichletParams& alpha, double gamma) {
  return gamma * laplacePolyExponent(report, alpha);
}

MseExperimentResult mseRatioExperiment(const Objective& objective, const MaximizerReport& report,
                                       const DirichletParams& alpha, const MseSettings& s) {
  requireGrid(s.nGrid);
  if (s.nGrid.size() < kSlopeWindow)
    throw ValidationError("slope fitting needs at least five n values");
  MseExperimentResult out;
  out.theoreticalSlope = theoreticalMseSlope(report, alpha, s.gamma);
  for (std::size_t j = 0; j < s.nGrid.size(); ++j) {
    const double n = s.nGrid[j];
    const auto ref = referenceMoments(objective, report, alpha, n, s, cellSeed(s.seed, 0, j, kPurposeSecondMoment));
    out.points.push_back(msePoint(objective, report, alpha, n, s, ref, cellSeed(s.seed, 0, j, kPurposeIS)));
  }
  std::vector<std::size_t> order(s.nGrid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.nGrid[a] < s.nGrid[b]; });
  std::vector<double> lx, ly;
  for (std::size_t k = order.size() - kSlopeWindow; k < order.size(); ++k) {
    lx.push_back(std::log(s.nGrid[order[k]]));
    ly.push_back(out.points[order[k]].logMseRatio);
  }
  const auto fit = fitLine(lx, ly);
  out.fittedSlope = fit.slope;
  out.fittedIntercept = fit.intercept;
  for (const auto& p : out.points) {
    out.nGrid.push_back(p.n);
    out.logMseRatio.push_back(p.logMseRatio);
  }
  return out;
}

std::vector<MsePoint> biasDiagnostic(const Objective& objective, const MaximizerReport& report,
                                     const DirichletParams& alpha, const MseSettings& s) {
  requireGrid(s.nGrid);
  std::vector<MsePoint> out;
  for (std::size_t j = 0; j < s.nGrid.size(); ++j) {
    const double n = s.nGrid[j];
    const auto ref = referenceMoments(objective, report, alpha, n, s, cellSeed(s.seed, 0, j, kPurposeSecondMoment));
    out.push_back(msePoint(objective, report, alpha, n, s, ref, cellSeed(s.seed, 0, j, kPurposeIS)));
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<SummaryStat> summarize(const std::vector<ExperimentRow>& rows) {
  std::vector<std::pair<std::string, double>> keys;
  std::vector<std::vector<double>> groups;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.quantity, r.n);
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      groups.emplace_back();
      it = keys.end() - 1;
    }
    groups[static_cast<std::size_t>(it - keys.begin())].push_back(r.value);
  }
  std::vector<SummaryStat> out;
  for (std::size_t g = 0; g < keys.size(); ++g) {
    SummaryStat st;
    st.quantity = keys[g].first;
    st.n = keys[g].second;
    st.count = groups[g].size();
    st.median = quantile(groups[g], 0.5);
    st.q25 = quantile(groups[g], 0.25);
    st.q75 = quantile(groups[g], 0.75);
    st.mean = std::accumulate(groups[g].begin(), groups[g].end(), 0.0) / static_cast<double>(st.count);
    out.push_back(st);
  }
  return out;
}

BatchMseResult runMseBatch(const std::vector<PreparedInstance>& instances, const DirichletParams& alpha,
                           const MseSettings& s, unsigned threads) {
  if (s.nGrid.size() < kSlopeWindow) throw ValidationError("slope fitting needs at least five n values");
  const auto cells = runMseCells(instances, alpha, s, threads);
  BatchMseResult out;
  const std::size_t per = s.nGrid.size();
  std::vector<double> slopes;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    MseExperimentResult res;
    res.theoreticalSlope = theoreticalMseSlope(instances[i].report, alpha, s.gamma);
    for (std::size_t j = 0; j < per; ++j) res.points.push_back(cells[i * per + j].point);
    std::vector<std::size_t> order(per);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.nGrid[a] < s.nGrid[b]; });
    std::vector<double> lx, ly;
    for (std::size_t k = per - kSlopeWindow; k < per; ++k) {
      lx.push_back(std::log(s.nGrid[order[k]]));
      ly.push_back(res.points[order[k]].logMseRatio);
    }
    const auto fit = fitLine(lx, ly);
    res.fittedSlope = fit.slope;
    res.fittedIntercept = fit.intercept;
    for (const auto& p : res.points) {
      res.nGrid.push_back(p.n);
      res.logMseRatio.push_back(p.logMseRatio);
      const std::string id = instances[i].id;
      out.rows.push_back({id, p.n, "log_mse_ratio", p.logMseRatio, p.policy});
      out.rows.push_back({id, p.n, "log_mse_is", p.logMseIS, p.policy});
      out.rows.push_back({id, p.n, "log_mse_mc", p.logMseMC, p.policy});
      out.rows.push_back({id, p.n, "truncated_fraction", p.truncatedFraction, p.policy});
    }
    slopes.push_back(res.fittedSlope);
    out.theoreticalSlope = res.theoreticalSlope;
    out.perInstance.push_back(std::move(res));
  }
  out.medianFittedSlope = quantile(slopes, 0.5);
  return out;
}

BatchBiasResult runBiasBatch(const std::vector<PreparedInstance>& instances, const DirichletParams& alpha,
                             const MseSettings& settings, unsigned threads) {
  // Only the bias and MSE_MC enter the ratio, so the IS second moment is not re-estimated.
  MseSettings s = settings;
  s.isMoment = IsMomentPolicy::kSampleVariance;
  const auto cells = runMseCells(instances, alpha, s, threads);
  BatchBiasResult out;
  const std::size_t per = s.nGrid.size();
  for (std::size_t j = 0; j < per; ++j) {
    std::vector<double> ratios;
    std::size_t zero = 0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const auto& p = cells[i * per + j].point;
      ratios.push_back(p.logBiasRatio);
      if (p.zeroBias) ++zero;
    }
    out.medianLogBiasRatio.push_back(quantile(ratios, 0.5));
    out.meanLogBiasRatio.push_back(std::accumulate(ratios.begin(), ratios.end(), 0.0) / static_cast<double>(ratios.size()));
    out.zeroTruncationFraction.push_back(static_cast<double>(zero) / static_cast<double>(instances.size()));
  }
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (std::size_t j = 0; j < per; ++j) {
      const auto& p = cells[i * per + j].point;
      out.rows.push_back({instances[i].id, p.n, "log_bias_ratio", p.logBiasRatio, p.policy});
      out.rows.push_back({instances[i].id, p.n, "zero_bias", p.zeroBias ? 1.0 : 0.0, p.policy});
      out.rows.push_back({instances[i].id, p.n, "truncated_fraction", p.truncatedFraction, p.policy});
    }
  }
  return out;
}

BatchCorrelationResult runCorrelationBatch(const std::vector<PreparedInstance>& instances,
                                           const DirichletParams& alpha, const CorrelationSettings& s,
                                           unsigned threads) {
  requireGrid(s.nGrid);
  const std::size_t per = s.nGrid.size();
  struct Cell {
    double rhoHat = 0.0;
    double rhoLimit = 0.0;
  };
  std::vector<Cell> cells(instances.size() * per);
  forEachChunk(cells.size(), threads, [&](std::size_t c) {
    const std::size_t i = c / per;
    const std::size_t j = c % per;
    const auto& rep = instances[i].report;
    const LdaObjective obj(instances[i].instance);
    const KlObjective kl(rep.thetaStar, rep.hAtStar);
    EstimatorConfig cfg;
    cfg.numSamples = s.numSamples;
    cfg.gamma = s.gamma;
    cfg.chunkSize = s.chunkSize;
    cfg.seed = cellSeed(s.seed, i, j, kPurposeCorrelation);
    cells[c].rhoHat = empiricalRhoSquared(obj, kl, alpha, s.nGrid[j], cfg, s.sampling);
    cells[c].rhoLimit = limitingRhoSquared(rep, alpha);
  });
  BatchCorrelationResult out;
  const std::string policy = s.sampling == RhoSampling::kImportance ? "is_weighted" : "prior";
  for (std::size_t j = 0; j < per; ++j) {
    std::vector<double> abs, raw;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      const auto& cell = cells[i * per + j];
      const double lr = std::log1p(-cell.rhoHat) - std::log1p(-cell.rhoLimit);
      abs.push_back(std::abs(lr));
      raw.push_back(lr);
    }
    out.medianAbsLogRatio.push_back(quantile(abs, 0.5));
    out.medianLogRatio.push_back(quantile(raw, 0.5));
  }
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (std::size_t j = 0; j < per; ++j) {
      const auto& cell = cells[i * per + j];
      const double n = s.nGrid[j];
      out.rows.push_back({instances[i].id, n, "rho_hat_sq", cell.rhoHat, policy});
      out.rows.push_back({instances[i].id, n, "rho_sq_limit", cell.rhoLimit, "closed_form"});
      out.rows.push_back({instances[i].id, n, "log_ratio", std::log1p(-cell.rhoHat) - std::log1p(-cell.rhoLimit), policy});
    }
  }
  return out;
}

BatchSparsityResult runSparsityBatch(const SparsitySettings& s, unsigned threads) {
  if (s.epsilonGrid.empty()) throw ValidationError("epsilon grid is empty");
  if (s.runsPerEpsilon == 0) throw ValidationError("need at least one run per epsilon");
  const std::size_t per = s.runsPerEpsilon;
  std::vector<SparsityRun> runs(s.epsilonGrid.size() * per);
  const auto alpha = DirichletParams::symmetric(s.K, s.alpha);
  forEachChunk(runs.size(), threads, [&](std::size_t c) {
    const std::size_t e = c / per;
    const std::size_t r = c % per;
    RandomStream stream(cellSeed(s.seed, r, e, kPurposeSparsity), 0);
    SparsityRun& run = runs[c];
    run.targetEpsilon = s.epsilonGrid[e];
    const TopicMatrix phi = genSparsityControlledPhi(s.K, s.V, s.epsilonGrid[e], stream);
    const auto docPrior = DirichletParams::symmetric(s.K, s.documentAlpha);
    std::shared_ptr<const LdaInstance> inst;
    MaximizerReport rep;
    for (std::size_t attempt = 0; attempt < s.documentAttempts; ++attempt) {
      const SimplexPoint theta = sampleDirichlet(docPrior, stream);
      const auto doc = sampleDocument(phi, theta, static_cast<std::size_t>(s.n), stream);
      auto candidate = std::make_shared<const LdaInstance>(toLdaInstance(phi, doc));
      auto found = findMaximizer(*candidate, CoverConfig{});
      if (found.report.m() == 0) {
        inst = std::move(candidate);
        rep = std::move(found.report);
        break;
      }
    }
    run.rhoHat = std::numeric_limits<double>::quiet_NaN();
    run.rhoLimit = std::numeric_limits<double>::quiet_NaN();
    if (!inst) {
      run.measuredEpsilon = measureSparsity(phi).epsilon;
      return;
    }
    run.interior = true;
    const auto sp = sparsityReport(*inst, rep);
    run.measuredEpsilon = sp.epsilon;
    run.epsilonZero = sp.epsilonZero;
    run.applicable = sp.applicable;
    if (sp.applicable) {
      run.lowerBound = *sp.lowerBound;
      run.lowerBoundTheorem = *sp.lowerBoundTheorem;
    }
    run.rhoLimit = limitingRhoSquaredInterior(rep);
    EstimatorConfig cfg;
    cfg.numSamples = s.numSamples;
    cfg.gamma = s.gamma;
    cfg.chunkSize = s.chunkSize;
    cfg.seed = stream.nextU64();
    const LdaObjective obj(inst);
    const KlObjective kl(rep.thetaStar, rep.hAtStar);
    run.rhoHat = empiricalRhoSquared(obj, kl, alpha, s.n, cfg, RhoSampling::kImportance);
  });

  BatchSparsityResult out;
  out.runs = runs;
  for (std::size_t e = 0; e < s.epsilonGrid.size(); ++e) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < per; ++r) {
      if (!runs[e * per + r].interior) continue;
      sum += runs[e * per + r].rhoHat;
      ++count;
    }
    out.meanRhoHat.push_back(count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN());
  }
  std::vector<double> xs, ys;
  for (std::size_t e = 0; e < s.epsilonGrid.size(); ++e) {
    if (std::isnan(out.meanRhoHat[e])) continue;
    xs.push_back(s.epsilonGrid[e]);
    ys.push_back(out.meanRhoHat[e]);
  }
  out.spearman = xs.size() >= 2 ? spearman(xs, ys) : 0.0;
  for (std::size_t c = 0; c < runs.size(); ++c) {
    const auto& run = runs[c];
    std::ostringstream id;
    id << "eps" << c / per << "_run" << c % per;
    out.rows.push_back({id.str(), s.n, "target_epsilon", run.targetEpsilon, "generator"});
    out.rows.push_back({id.str(), s.n, "measured_epsilon", run.measuredEpsilon, "generator"});
    if (!run.interior) continue;
    out.rows.push_back({id.str(), s.n, "epsilon_zero", run.epsilonZero, "closed_form"});
    out.rows.push_back({id.str(), s.n, "rho_hat_sq", run.rhoHat, "is_weighted"});
    out.rows.push_back({id.str(), s.n, "rho_sq_limit", run.rhoLimit, "closed_form"});
    if (run.applicable) {
      out.rows.push_back({id.str(), s.n, "lower_bound_proof", run.lowerBound, "closed_form"});
      out.rows.push_back({id.str(), s.n, "lower_bound_theorem", run.lowerBoundTheorem, "closed_form"});
    }
  }
  return out;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("Spearman correlation needs paired samples");
  const auto rx = averageRanks(x);
  const auto ry = averageRanks(y);
  const double nn = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / nn;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / nn;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace dirmc
