#include "dirmc/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "dirmc/error.hpp"
#include "dirmc/estimators.hpp"
#include "dirmc/experiments.hpp"
#include "dirmc/instances.hpp"
#include "dirmc/io.hpp"
#include "dirmc/laplace.hpp"
#include "dirmc/maximizer.hpp"

namespace dirmc {

namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kSubcommands = {"gen-instance", "check-kkt", "estimate", "experiment", "eval-corpus"};

// Options that only steer execution or output location; they never change
// result values, so they stay out of the manifest and results remain
// byte-identical across thread counts and output paths.
const std::set<std::string> kExecutionOptions = {"help",      "config", "threads", "out",        "out-dir",
                                                 "summary",   "record-time", "emit-gnuplot"};

constexpr std::uint64_t kPurposeGenerate = 1000;
constexpr std::uint64_t kPurposeCorpus = 2000;

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<double> parseList(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (tok.empty()) continue;
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
      throw ValidationError("cannot parse \"" + tok + "\" in " + what);
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError(what + " is empty");
  return out;
}

std::vector<std::string> splitNames(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

std::uint64_t defaultSeed() {
  const char* env = std::getenv(kSeedEnvVar);
  if (!env || !*env) return 0;
  std::uint64_t v = 0;
  const std::string s(env);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError(std::string(kSeedEnvVar) + " must be a non-negative integer, got \"" + s + "\"");
  return v;
}

// Turns a JSON config object into flag tokens. Inserted ahead of the user's
// own flags, so with take-last semantics the command line wins.
std::vector<std::string> configTokens(const fs::path& path) {
  const Json j = readJsonFile(path);
  if (!j.is_object()) throw ValidationError("config file must hold a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    if (key == "config") continue;
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back(flag);
    } else if (value.is_string()) {
      tokens.push_back(flag);
      tokens.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      tokens.push_back(flag);
      tokens.push_back(value.dump());
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& e : value) {
        if (!e.is_number() && !e.is_string()) throw ValidationError("config entry \"" + key + "\" has a nested value");
        if (!joined.empty()) joined += ",";
        joined += e.is_string() ? e.get<std::string>() : e.dump();
      }
      tokens.push_back(flag);
      tokens.push_back(joined);
    } else if (!value.is_null()) {
      throw ValidationError("config entry \"" + key + "\" must be a scalar or a list");
    }
  }
  return tokens;
}

struct Common {
  std::string configPath;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  bool recordTime = false;
};

class Manifest {
 public:
  Manifest(const CLI::App& root, const CLI::App& sub, const std::set<const CLI::Option*>& flags, const Common& c)
      : command_(sub.get_name()), seed_(c.seed), recordTime_(c.recordTime) {
    for (const CLI::App* app : {&root, &sub}) {
      for (const CLI::Option* opt : app->get_options()) {
        const std::string name = opt->get_single_name();
        if (kExecutionOptions.count(name)) continue;
        if (flags.count(opt)) {
          config_[name] = opt->count() > 0;
          continue;
        }
        std::string value;
        if (opt->count() > 0) {
          value = opt->results().back();
        } else {
          value = opt->get_default_str();
        }
        if (!value.empty()) config_[name] = value;
      }
    }
    config_["seed"] = std::to_string(c.seed);
  }

  void resolve(const std::string& key, Json value) { resolved_[key] = std::move(value); }

  Json json() const {
    Json j;
    j["tool"] = "dirmc";
    j["artifact_version"] = kArtifactVersion;
    j["command"] = command_;
    j["seed"] = seed_;
    j["config"] = config_;
    if (!resolved_.empty()) j["resolved"] = resolved_;
    if (recordTime_) {
      const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      std::tm tm{};
      gmtime_r(&now, &tm);
      char buf[32];
      std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
      j["recorded_at"] = buf;
    }
    return j;
  }

 private:
  std::string command_;
  std::uint64_t seed_;
  bool recordTime_;
  Json config_ = Json::object();
  Json resolved_ = Json::object();
};

Json vec(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json reportJson(const MaximizerReport& r) {
  Json j;
  j["m"] = r.m();
  j["theta_star"] = r.thetaStar.vec();
  j["active_set"] = r.activeSet;
  j["lambda"] = r.lambda;
  j["min_lambda"] = r.minLambda;
  j["mu"] = r.mu;
  j["kkt_residual"] = r.kktResidual;
  j["h_at_star"] = r.hAtStar;
  j["strict_complementarity"] = r.strictComplementarity;
  j["reduced_hessian_negative_definite"] = r.reducedHessianNegativeDefinite;
  return j;
}

Json estimateJson(const LogEstimate& e) {
  Json j;
  j["n"] = e.n;
  j["num_samples"] = e.numSamples;
  j["seed"] = e.seed;
  j["log_mean"] = e.logMean;
  j["log_std_error"] = e.logStdError();
  j["log_second_moment"] = e.logSecondMoment;
  j["log_variance"] = e.logVariance;
  j["truncated_fraction"] = e.truncatedFraction;
  j["log_truncated_mass"] = e.logTruncatedMass;
  j["non_positive"] = e.nonPositive;
  return j;
}

MaximizerReport reportFor(const LdaInstance& inst, const CoverConfig& cfg) {
  if (inst.known()) return kktReport(inst, inst.known()->thetaStar, cfg);
  return findMaximizer(inst, cfg).report;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    writeTextFile(path, text);
}

std::string rowsCsv(const Json& manifest, const std::vector<ExperimentRow>& rows) {
  std::ostringstream os;
  os << "# manifest: " << manifest.dump() << "\n";
  os << "instance_id,n,quantity,value,reference_policy\n";
  for (const auto& r : rows)
    os << r.instanceId << "," << num(r.n) << "," << r.quantity << "," << num(r.value) << "," << r.referencePolicy << "\n";
  return os.str();
}

Json statsJson(const std::vector<SummaryStat>& stats) {
  Json a = Json::array();
  for (const auto& s : stats) {
    Json j;
    j["quantity"] = s.quantity;
    j["n"] = s.n;
    j["median"] = s.median;
    j["q25"] = s.q25;
    j["q75"] = s.q75;
    j["iqr"] = s.q75 - s.q25;
    j["mean"] = s.mean;
    j["count"] = s.count;
    a.push_back(std::move(j));
  }
  return a;
}

void writeGnuplot(const fs::path& dir, const std::string& kind, const std::vector<SummaryStat>& stats) {
  std::vector<std::string> quantities;
  for (const auto& s : stats)
    if (std::find(quantities.begin(), quantities.end(), s.quantity) == quantities.end()) quantities.push_back(s.quantity);
  std::ostringstream dat;
  for (std::size_t q = 0; q < quantities.size(); ++q) {
    if (q) dat << "\n\n";
    dat << "# " << quantities[q] << "\n# n median q25 q75\n";
    for (const auto& s : stats)
      if (s.quantity == quantities[q]) dat << num(s.n) << " " << num(s.median) << " " << num(s.q25) << " " << num(s.q75) << "\n";
  }
  const std::string datName = kind + "_summary.dat";
  writeTextFile(dir / datName, dat.str());
  std::ostringstream gp;
  gp << "set terminal pngcairo size 900,600\n";
  gp << "set output '" << kind << ".png'\n";
  gp << "set logscale x\nset xlabel 'n'\nset key outside\n";
  gp << "plot ";
  for (std::size_t q = 0; q < quantities.size(); ++q) {
    if (q) gp << ", \\\n     ";
    gp << "'" << datName << "' index " << q << " using 1:2:3:4 with yerrorlines title '" << quantities[q] << "'";
  }
  gp << "\n";
  writeTextFile(dir / (kind + ".gp"), gp.str());
}

TruncationMode truncationModeFrom(const std::string& s) {
  if (s == "relative") return TruncationMode::kRelative;
  if (s == "absolute") return TruncationMode::kAbsolute;
  throw ValidationError("truncation mode must be relative, absolute or none, got \"" + s + "\"");
}

// --- gen-instance ------------------------------------------------------------

struct GenOptions {
  GeneratorConfig cfg;
  std::string out;
};

void addGeneratorOptions(CLI::App* sub, GeneratorConfig& cfg) {
  sub->add_option("--K", cfg.K, "number of topics");
  sub->add_option("--V", cfg.V, "vocabulary size");
  sub->add_option("--m", cfg.m, "planted zero count");
  sub->add_option("--phi-prior", cfg.phiPrior, "symmetric Dirichlet parameter of the topic rows");
  sub->add_option("--lambda-min", cfg.lambdaMin);
  sub->add_option("--lambda-max", cfg.lambdaMax);
  sub->add_option("--max-retries", cfg.maxRetries);
  sub->add_option("--doc-length", cfg.n, "document length n stored with the instance");
}

int cmdGenInstance(GenOptions& o, Manifest& manifest, std::ostream& out) {
  o.cfg.validate();
  const LdaInstance inst = generateInstance(o.cfg);
  const auto report = kktReport(inst, inst.known()->thetaStar, CoverConfig{});
  Json j;
  j["manifest"] = manifest.json();
  const Json body = instanceToJson(inst);
  for (const auto& [k, v] : body.items()) j[k] = v;
  j["report"] = reportJson(report);
  emit(o.out, dumpJson(j), out);
  return 0;
}

// --- check-kkt ---------------------------------------------------------------

struct KktOptions {
  std::string instance;
  CoverConfig cfg;
  double recoverTol = 1e-4;
  std::string out;
};

int cmdCheckKkt(KktOptions& o, Manifest& manifest, std::ostream& out) {
  o.cfg.validate();
  const LdaInstance inst = loadInstance(o.instance);
  const auto res = findMaximizer(inst, o.cfg);
  Json j;
  j["manifest"] = manifest.json();
  j["report"] = reportJson(res.report);
  j["cover_iterations"] = res.cover.iterations;
  j["newton_steps"] = res.newtonSteps;
  bool recovered = true;
  if (inst.known()) {
    const auto& known = *inst.known();
    const bool sameSet = known.activeSet == res.report.activeSet;
    double lambdaErr = sameSet ? 0.0 : std::numeric_limits<double>::infinity();
    if (sameSet)
      for (std::size_t i = 0; i < known.lambda.size(); ++i)
        lambdaErr = std::max(lambdaErr, std::abs(known.lambda[i] - res.report.lambda[i]));
    double thetaErr = 0.0;
    for (std::size_t i = 0; i < inst.numTopics(); ++i)
      thetaErr = std::max(thetaErr, std::abs(known.thetaStar[i] - res.report.thetaStar[i]));
    recovered = sameSet && lambdaErr <= o.recoverTol && thetaErr <= o.recoverTol;
    Json p;
    p["active_set"] = known.activeSet;
    p["active_set_match"] = sameSet;
    p["max_lambda_error"] = lambdaErr;
    p["max_theta_error"] = thetaErr;
    p["recovered"] = recovered;
    j["planted"] = std::move(p);
  }
  emit(o.out, dumpJson(j), out);
  return recovered ? 0 : 3;
}

// --- estimate ----------------------------------------------------------------

struct EstimateOptions {
  std::string instance;
  std::string method;
  double n = -1.0;
  std::size_t numSamples = 10000;
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon = 0.1;
  std::string truncation = "relative";
  std::string cvMode = "pooled";
  std::size_t chunkSize = 4096;
  bool allowUnstableGamma = false;
  std::string out;
  CLI::Option* gammaOpt = nullptr;
  CLI::Option* epsilonOpt = nullptr;
  CLI::Option* truncationOpt = nullptr;
  CLI::Option* cvModeOpt = nullptr;
  CLI::Option* unstableOpt = nullptr;
};

int cmdEstimate(EstimateOptions& o, const Common& c, Manifest& manifest, std::ostream& out) {
  if (o.method != "mc" && o.method != "is" && o.method != "cv")
    throw ValidationError("--method must be mc, is or cv, got \"" + o.method + "\"");
  auto reject = [&](CLI::Option* opt, const char* allowed) {
    if (opt->count() > 0)
      throw ValidationError(opt->get_name() + " applies to --method " + allowed + " only, not " + o.method);
  };
  if (o.method != "is") {
    reject(o.gammaOpt, "is");
    reject(o.epsilonOpt, "is");
    reject(o.truncationOpt, "is");
    reject(o.unstableOpt, "is");
  }
  if (o.method != "cv") reject(o.cvModeOpt, "cv");

  const auto inst = std::make_shared<const LdaInstance>(loadInstance(o.instance));
  const double n = o.n >= 0.0 ? o.n : inst->n();
  if (!std::isfinite(n)) throw ValidationError("--n must be finite");
  const auto alpha = DirichletParams::symmetric(inst->numTopics(), o.alpha);
  const LdaObjective obj(inst);

  EstimatorConfig cfg;
  cfg.numSamples = o.numSamples;
  cfg.seed = c.seed;
  cfg.chunkSize = o.chunkSize;
  cfg.threads = c.threads;
  cfg.gamma = o.gamma;
  cfg.allowUnstableGamma = o.allowUnstableGamma;
  cfg.cvMode = o.cvMode == "pilot" ? CvMode::kPilot : CvMode::kPooled;
  if (o.cvMode != "pilot" && o.cvMode != "pooled") throw ValidationError("--cv-mode must be pooled or pilot");
  cfg.validate();

  Json j;
  if (o.method == "mc") {
    const auto e = plainMC(obj, alpha, n, cfg);
    j["manifest"] = manifest.json();
    j["method"] = o.method;
    j["estimate"] = estimateJson(e);
  } else {
    cfg.validateGamma();
    const auto report = reportFor(*inst, CoverConfig{});
    if (o.method == "is") {
      if (o.truncation != "none") cfg.truncation.emplace(o.epsilon, truncationModeFrom(o.truncation), report.thetaStar);
      const auto e = importanceSampling(obj, alpha, n, report.thetaStar, cfg);
      j["manifest"] = manifest.json();
      j["method"] = o.method;
      j["estimate"] = estimateJson(e);
      j["proposal"] = isProposal(alpha, n, report.thetaStar, cfg).vec();
    } else {
      const KlObjective kl(report.thetaStar, report.hAtStar);
      const auto r = controlVariate(obj, kl, alpha, n, cfg);
      j["manifest"] = manifest.json();
      j["method"] = o.method;
      j["estimate"] = estimateJson(r.estimate);
      j["cv_coefficient"] = r.coefficient;
      j["rho_squared"] = r.rhoSquared;
      j["variance_ratio"] = r.varianceRatio;
      j["log_known_mean"] = r.logKnownMean;
      j["pilot_samples"] = r.pilotSamples;
    }
    j["maximizer"] = reportJson(report);
  }
  emit(o.out, dumpJson(j), out);
  return 0;
}

// --- experiment --------------------------------------------------------------

struct ExperimentOptions {
  std::string kind;
  std::string instances;
  std::size_t numInstances = 20;
  GeneratorConfig gen;
  double alpha = 0.1;
  std::string nGrid;
  std::size_t numSamples = 10000;
  double gamma = 0.9;
  double epsilon = 0.1;
  std::string truncation = "relative";
  std::string reference = "high_precision_is";
  std::size_t referenceSamples = 10000;
  std::string isMoment = "reference_is";
  bool allowUnstableGamma = false;
  std::string rhoSampling = "importance";
  std::string epsGrid = "1e-7,1e-5,1e-3,0.01,0.1,0.5,1,2,5";
  std::size_t runsPerEpsilon = 10;
  double documentAlpha = 1.0;
  std::size_t chunkSize = 4096;
  std::string outDir;
  bool emitGnuplot = false;
  CLI::Option* kOpt = nullptr;
  CLI::Option* epsGridOpt = nullptr;
  CLI::Option* runsOpt = nullptr;
  CLI::Option* docAlphaOpt = nullptr;
  CLI::Option* referenceOpt = nullptr;
  CLI::Option* isMomentOpt = nullptr;
  CLI::Option* rhoOpt = nullptr;
  CLI::Option* instancesOpt = nullptr;
};

std::vector<double> defaultGrid(const std::string& kind) {
  if (kind == "mse-ratio") {
    std::vector<double> g;
    for (int k = 0; k < 8; ++k) g.push_back(std::round(1000.0 * std::pow(15.0, k / 7.0)));
    return g;
  }
  if (kind == "bias") return {50, 100, 200, 400, 1000};
  return {1000, 2000, 5000, 10000};
}

std::vector<PreparedInstance> prepareInstances(const ExperimentOptions& o, const Common& c) {
  std::vector<PreparedInstance> out;
  if (!o.instances.empty()) {
    std::vector<fs::path> paths;
    for (const auto& name : splitNames(o.instances)) {
      if (fs::is_directory(name)) {
        std::vector<fs::path> inDir;
        for (const auto& entry : fs::directory_iterator(name))
          if (entry.path().extension() == ".json") inDir.push_back(entry.path());
        std::sort(inDir.begin(), inDir.end());
        paths.insert(paths.end(), inDir.begin(), inDir.end());
      } else {
        paths.emplace_back(name);
      }
    }
    if (paths.empty()) throw ValidationError("--instances matched no instance files");
    for (const auto& p : paths) {
      auto inst = std::make_shared<const LdaInstance>(loadInstance(p));
      auto report = reportFor(*inst, CoverConfig{});
      out.push_back({p.stem().string(), std::move(inst), std::move(report)});
    }
    return out;
  }
  if (o.numInstances == 0) throw ValidationError("--num-instances must be positive");
  GeneratorConfig cfg = o.gen;
  cfg.validate();
  for (std::size_t i = 0; i < o.numInstances; ++i) {
    cfg.seed = cellSeed(c.seed, i, 0, kPurposeGenerate);
    auto inst = std::make_shared<const LdaInstance>(generateInstance(cfg));
    auto report = kktReport(*inst, inst->known()->thetaStar, CoverConfig{});
    char id[32];
    std::snprintf(id, sizeof id, "inst%03zu", i);
    out.push_back({id, std::move(inst), std::move(report)});
  }
  return out;
}

int cmdExperiment(ExperimentOptions& o, const Common& c, Manifest& manifest) {
  const std::set<std::string> kinds = {"mse-ratio", "cv-correlation", "bias", "sparsity"};
  if (!kinds.count(o.kind)) throw ValidationError("--kind must be mse-ratio, cv-correlation, bias or sparsity");
  if (o.outDir.empty()) throw ValidationError("--out-dir is required");
  const bool sparsity = o.kind == "sparsity";
  auto only = [&](CLI::Option* opt, bool ok, const char* which) {
    if (opt->count() > 0 && !ok) throw ValidationError(opt->get_name() + " applies to " + which + " experiments only");
  };
  only(o.epsGridOpt, sparsity, "sparsity");
  only(o.runsOpt, sparsity, "sparsity");
  only(o.docAlphaOpt, sparsity, "sparsity");
  only(o.instancesOpt, !sparsity, "non-sparsity");
  only(o.referenceOpt, o.kind == "mse-ratio" || o.kind == "bias", "mse-ratio and bias");
  only(o.isMomentOpt, o.kind == "mse-ratio", "mse-ratio");
  only(o.rhoOpt, o.kind == "cv-correlation", "cv-correlation");

  const fs::path dir(o.outDir);
  std::vector<ExperimentRow> rows;
  Json summary;
  const std::vector<double> grid = o.nGrid.empty() ? defaultGrid(o.kind) : parseList(o.nGrid, "--n-grid");

  if (sparsity) {
    SparsitySettings s;
    s.K = o.kOpt->count() > 0 ? o.gen.K : 10;
    s.V = o.gen.V;
    s.n = o.gen.n;
    s.epsilonGrid = parseList(o.epsGrid, "--eps-grid");
    s.runsPerEpsilon = o.runsPerEpsilon;
    s.numSamples = o.numSamples;
    s.gamma = o.gamma;
    s.alpha = o.alpha;
    s.documentAlpha = o.documentAlpha;
    s.seed = c.seed;
    s.chunkSize = o.chunkSize;
    manifest.resolve("K", s.K);
    manifest.resolve("eps_grid", vec(s.epsilonGrid));
    const auto res = runSparsityBatch(s, c.threads);
    rows = res.rows;
    std::size_t applicable = 0, satisfied = 0, interior = 0;
    for (const auto& r : res.runs) {
      if (r.interior) ++interior;
      if (!r.applicable) continue;
      ++applicable;
      if (r.rhoHat >= r.lowerBound) ++satisfied;
    }
    summary["eps_grid"] = vec(s.epsilonGrid);
    summary["mean_rho_hat_sq"] = vec(res.meanRhoHat);
    summary["spearman_eps_vs_mean_rho_hat_sq"] = res.spearman;
    summary["interior_runs"] = interior;
    summary["applicable_runs"] = applicable;
    summary["bound_satisfied_runs"] = satisfied;
  } else {
    const auto instances = prepareInstances(o, c);
    const std::size_t k = instances.front().instance->numTopics();
    for (const auto& p : instances)
      if (p.instance->numTopics() != k) throw ValidationError("all instances of an experiment need the same K");
    const auto alpha = DirichletParams::symmetric(k, o.alpha);
    manifest.resolve("n_grid", vec(grid));
    Json ids = Json::array();
    for (const auto& p : instances) ids.push_back(p.id);
    manifest.resolve("instances", ids);

    if (o.kind == "cv-correlation") {
      CorrelationSettings s;
      s.nGrid = grid;
      s.numSamples = o.numSamples;
      s.gamma = o.gamma;
      s.seed = c.seed;
      s.chunkSize = o.chunkSize;
      if (o.rhoSampling == "importance")
        s.sampling = RhoSampling::kImportance;
      else if (o.rhoSampling == "prior")
        s.sampling = RhoSampling::kPrior;
      else
        throw ValidationError("--rho-sampling must be importance or prior");
      const auto res = runCorrelationBatch(instances, alpha, s, c.threads);
      rows = res.rows;
      summary["n_grid"] = vec(grid);
      summary["median_abs_log_ratio"] = vec(res.medianAbsLogRatio);
      summary["median_log_ratio"] = vec(res.medianLogRatio);
    } else {
      MseSettings s;
      s.nGrid = grid;
      s.gamma = o.gamma;
      s.epsilon = o.epsilon;
      s.mode = truncationModeFrom(o.truncation);
      s.numSamplesIS = o.numSamples;
      s.numSamplesMC = o.numSamples;
      s.referenceSamples = o.referenceSamples;
      s.policy = referencePolicyFromString(o.reference);
      s.isMoment = isMomentPolicyFromString(o.isMoment);
      s.seed = c.seed;
      s.chunkSize = o.chunkSize;
      s.allowUnstableGamma = o.allowUnstableGamma;
      EstimatorConfig probe;
      probe.gamma = s.gamma;
      probe.allowUnstableGamma = s.allowUnstableGamma;
      probe.validateGamma();
      if (o.kind == "mse-ratio") {
        const auto res = runMseBatch(instances, alpha, s, c.threads);
        rows = res.rows;
        summary["n_grid"] = vec(grid);
        summary["fitted_slope"] = res.medianFittedSlope;
        summary["theoretical_slope"] = res.theoreticalSlope;
        summary["slope_window"] = kSlopeWindow;
        Json per = Json::array();
        for (std::size_t i = 0; i < instances.size(); ++i) {
          Json e;
          e["instance_id"] = instances[i].id;
          e["fitted_slope"] = res.perInstance[i].fittedSlope;
          e["fitted_intercept"] = res.perInstance[i].fittedIntercept;
          e["theoretical_slope"] = res.perInstance[i].theoreticalSlope;
          per.push_back(std::move(e));
        }
        summary["per_instance"] = std::move(per);
      } else {
        const auto res = runBiasBatch(instances, alpha, s, c.threads);
        rows = res.rows;
        summary["n_grid"] = vec(grid);
        summary["median_log_bias_ratio"] = vec(res.medianLogBiasRatio);
        summary["mean_log_bias_ratio"] = vec(res.meanLogBiasRatio);
        summary["zero_truncation_fraction"] = vec(res.zeroTruncationFraction);
        summary["bias_floor"] = kBiasFloor;
      }
    }
  }

  const Json m = manifest.json();
  const auto stats = summarize(rows);
  Json full;
  full["manifest"] = m;
  full["kind"] = o.kind;
  for (const auto& [key, value] : summary.items()) full[key] = value;
  full["stats"] = statsJson(stats);
  writeTextFile(dir / (o.kind + ".csv"), rowsCsv(m, rows));
  writeTextFile(dir / (o.kind + "_summary.json"), dumpJson(full));
  if (o.emitGnuplot) writeGnuplot(dir, o.kind, stats);
  return 0;
}

// --- eval-corpus -------------------------------------------------------------

struct CorpusOptions {
  std::string topics;
  std::string corpus;
  std::string methods = "mc,is,cv";
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon = 0.1;
  std::size_t numSamples = 10000;
  std::size_t referenceSamples = 10000;
  std::size_t chunkSize = 4096;
  std::string out;
  std::string summary;
};

int cmdEvalCorpus(CorpusOptions& o, const Common& c, Manifest& manifest, std::ostream& out) {
  const auto methods = splitNames(o.methods);
  for (const auto& m : methods)
    if (m != "mc" && m != "is" && m != "cv") throw ValidationError("--methods entries must be mc, is or cv");
  auto has = [&](const char* m) { return std::find(methods.begin(), methods.end(), m) != methods.end(); };

  const TopicMatrix phi = loadTopicMatrix(o.topics);
  const auto docs = loadCorpus(o.corpus);
  if (docs.empty()) throw ValidationError("corpus has no documents");
  const auto alpha = DirichletParams::symmetric(phi.numTopics(), o.alpha);

  struct DocResult {
    double n = 0.0;
    std::size_t m = 0;
    double minLambda = 0.0;
    double hAtStar = 0.0;
    double logMc = 0.0, logIs = 0.0, logCv = 0.0;
    double logMseRatio = 0.0;
    std::string policy;
  };
  std::vector<DocResult> results(docs.size());
  EstimatorConfig probe;
  probe.gamma = o.gamma;
  probe.validateGamma();

  forEachChunk(docs.size(), c.threads, [&](std::size_t d) {
    const auto inst = std::make_shared<const LdaInstance>(toLdaInstance(phi, docs[d]));
    const auto report = findMaximizer(*inst, CoverConfig{}).report;
    const LdaObjective obj(inst);
    const double n = docs[d].n;
    DocResult& r = results[d];
    r.n = n;
    r.m = report.m();
    r.minLambda = report.minLambda;
    r.hAtStar = report.hAtStar;
    EstimatorConfig cfg;
    cfg.numSamples = o.numSamples;
    cfg.gamma = o.gamma;
    cfg.chunkSize = o.chunkSize;
    if (has("mc")) {
      cfg.seed = cellSeed(c.seed, d, 0, kPurposeCorpus);
      r.logMc = plainMC(obj, alpha, n, cfg).logMean;
    }
    if (has("is")) {
      cfg.seed = cellSeed(c.seed, d, 1, kPurposeCorpus);
      cfg.truncation.emplace(o.epsilon, TruncationMode::kRelative, report.thetaStar);
      r.logIs = importanceSampling(obj, alpha, n, report.thetaStar, cfg).logMean;
      cfg.truncation.reset();
    }
    if (has("cv")) {
      cfg.seed = cellSeed(c.seed, d, 2, kPurposeCorpus);
      const KlObjective kl(report.thetaStar, report.hAtStar);
      r.logCv = controlVariate(obj, kl, alpha, n, cfg).estimate.logMean;
    }
    MseSettings s;
    s.nGrid = {n};
    s.gamma = o.gamma;
    s.epsilon = o.epsilon;
    s.numSamplesIS = o.numSamples;
    s.numSamplesMC = o.numSamples;
    s.referenceSamples = o.referenceSamples;
    s.chunkSize = o.chunkSize;
    const auto ref = referenceMoments(obj, report, alpha, n, s, cellSeed(c.seed, d, 3, kPurposeCorpus));
    const auto pt = msePoint(obj, report, alpha, n, s, ref, cellSeed(c.seed, d, 4, kPurposeCorpus));
    r.logMseRatio = pt.logMseRatio;
    r.policy = pt.policy;
  });

  const Json m = manifest.json();
  std::ostringstream os;
  os << "# manifest: " << m.dump() << "\n";
  os << "doc_id,n";
  for (const auto& meth : methods) os << ",log_mean_" << meth;
  os << ",log_mse_ratio,m,min_lambda,h_at_star,reference_policy\n";
  std::vector<double> lengths, ratios;
  for (std::size_t d = 0; d < results.size(); ++d) {
    const auto& r = results[d];
    os << d << "," << num(r.n);
    for (const auto& meth : methods) os << "," << num(meth == "mc" ? r.logMc : meth == "is" ? r.logIs : r.logCv);
    os << "," << num(r.logMseRatio) << "," << r.m << "," << num(r.minLambda) << "," << num(r.hAtStar) << "," << r.policy
       << "\n";
    lengths.push_back(r.n);
    ratios.push_back(r.logMseRatio);
  }
  emit(o.out, os.str(), out);
  if (!o.summary.empty()) {
    Json s;
    s["manifest"] = m;
    s["documents"] = results.size();
    s["median_log_mse_ratio"] = quantile(ratios, 0.5);
    s["spearman_length_vs_log_mse_ratio"] = results.size() >= 2 ? spearman(lengths, ratios) : 0.0;
    writeTextFile(o.summary, dumpJson(s));
  }
  return 0;
}

int exitCodeFor(const Error& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const GenerationError*>(&e)) return 3;
  return 4;
}

}  // namespace

int runCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dirichlet expectations of exp(nH): estimators, maximizers and experiments", "dirmc"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);
  std::set<const CLI::Option*> flags;

  Common common;
  app.add_option("--config", common.configPath, "JSON file of flag values; command-line flags take precedence");
  app.add_option("--threads", common.threads, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", common.seed, std::string("random seed (default from ") + kSeedEnvVar + ")");
  flags.insert(app.add_flag("--record-time", common.recordTime, "add a UTC timestamp to the manifest"));

  GenOptions gen;
  auto* genCmd = app.add_subcommand("gen-instance", "generate a planted LDA instance");
  addGeneratorOptions(genCmd, gen.cfg);
  genCmd->add_option("--out", gen.out, "output path (stdout when omitted)");

  KktOptions kkt;
  auto* kktCmd = app.add_subcommand("check-kkt", "find the maximizer of H and check the KKT conditions");
  kktCmd->add_option("--instance", kkt.instance)->required();
  kktCmd->add_option("--max-iters", kkt.cfg.maxIters);
  kktCmd->add_option("--zero-tol", kkt.cfg.zeroTol);
  kktCmd->add_option("--kkt-tol", kkt.cfg.kktTol);
  kktCmd->add_option("--recover-tol", kkt.recoverTol, "tolerance for recovering a planted maximizer");
  kktCmd->add_option("--out", kkt.out);

  EstimateOptions est;
  auto* estCmd = app.add_subcommand("estimate", "estimate log I(n) with mc, is or cv");
  estCmd->add_option("--instance", est.instance)->required();
  estCmd->add_option("--method", est.method)->required();
  estCmd->add_option("--n", est.n, "document length (default: the instance's)");
  estCmd->add_option("--N", est.numSamples, "number of samples");
  estCmd->add_option("--alpha", est.alpha, "symmetric Dirichlet prior");
  est.gammaOpt = estCmd->add_option("--gamma", est.gamma);
  est.epsilonOpt = estCmd->add_option("--epsilon", est.epsilon);
  est.truncationOpt = estCmd->add_option("--truncation", est.truncation, "relative, absolute or none");
  est.cvModeOpt = estCmd->add_option("--cv-mode", est.cvMode, "pooled or pilot");
  estCmd->add_option("--chunk-size", est.chunkSize);
  est.unstableOpt = estCmd->add_flag("--allow-unstable-gamma", est.allowUnstableGamma);
  flags.insert(est.unstableOpt);
  estCmd->add_option("--out", est.out);

  ExperimentOptions ex;
  auto* exCmd = app.add_subcommand("experiment", "run an experiment sweep and write CSV plus summary JSON");
  exCmd->add_option("--kind", ex.kind, "mse-ratio, cv-correlation, bias or sparsity")->required();
  ex.instancesOpt = exCmd->add_option("--instances", ex.instances, "instance files or directories, comma separated");
  exCmd->add_option("--num-instances", ex.numInstances);
  addGeneratorOptions(exCmd, ex.gen);
  ex.kOpt = exCmd->get_option("--K");
  exCmd->add_option("--alpha", ex.alpha);
  exCmd->add_option("--n-grid", ex.nGrid, "comma-separated document lengths");
  exCmd->add_option("--N", ex.numSamples);
  exCmd->add_option("--gamma", ex.gamma);
  exCmd->add_option("--epsilon", ex.epsilon);
  exCmd->add_option("--truncation", ex.truncation, "relative or absolute");
  ex.referenceOpt = exCmd->add_option("--reference", ex.reference, "high_precision_is, quadrature or closed_form");
  exCmd->add_option("--reference-samples", ex.referenceSamples);
  ex.isMomentOpt = exCmd->add_option("--is-moment", ex.isMoment,
                                     "IS second moment for MSE_IS: reference_is or sample_variance");
  flags.insert(exCmd->add_flag("--allow-unstable-gamma", ex.allowUnstableGamma));
  ex.rhoOpt = exCmd->add_option("--rho-sampling", ex.rhoSampling, "importance or prior");
  ex.epsGridOpt = exCmd->add_option("--eps-grid", ex.epsGrid);
  ex.runsOpt = exCmd->add_option("--runs-per-epsilon", ex.runsPerEpsilon);
  ex.docAlphaOpt = exCmd->add_option("--document-alpha", ex.documentAlpha);
  exCmd->add_option("--chunk-size", ex.chunkSize);
  exCmd->add_option("--out-dir", ex.outDir)->required();
  flags.insert(exCmd->add_flag("--emit-gnuplot", ex.emitGnuplot));

  CorpusOptions corp;
  auto* corpCmd = app.add_subcommand("eval-corpus", "evaluate every document of a corpus");
  corpCmd->add_option("--topics", corp.topics)->required();
  corpCmd->add_option("--corpus", corp.corpus)->required();
  corpCmd->add_option("--methods", corp.methods, "comma-separated subset of mc,is,cv");
  corpCmd->add_option("--alpha", corp.alpha);
  corpCmd->add_option("--gamma", corp.gamma);
  corpCmd->add_option("--epsilon", corp.epsilon);
  corpCmd->add_option("--N", corp.numSamples);
  corpCmd->add_option("--reference-samples", corp.referenceSamples);
  corpCmd->add_option("--chunk-size", corp.chunkSize);
  corpCmd->add_option("--out", corp.out, "CSV path (stdout when omitted)");
  corpCmd->add_option("--summary", corp.summary, "optional summary JSON path");

  for (auto* sub : {genCmd, kktCmd, estCmd, exCmd, corpCmd}) sub->fallthrough();

  try {
    std::vector<std::string> tokens(args.begin() + (args.empty() ? 0 : 1), args.end());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      std::string path;
      if (tokens[i] == "--config" && i + 1 < tokens.size()) path = tokens[i + 1];
      else if (tokens[i].rfind("--config=", 0) == 0) path = tokens[i].substr(9);
      if (path.empty()) continue;
      const auto extra = configTokens(path);
      const auto sub = std::find_first_of(tokens.begin(), tokens.end(), kSubcommands.begin(), kSubcommands.end());
      if (sub == tokens.end()) throw ValidationError("--config needs a subcommand");
      tokens.insert(sub + 1, extra.begin(), extra.end());
      break;
    }
    common.seed = defaultSeed();
    std::reverse(tokens.begin(), tokens.end());
    try {
      app.parse(tokens);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? 0 : 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    Manifest manifest(app, *sub, flags, common);
    if (sub == genCmd) {
      gen.cfg.seed = common.seed;
      return cmdGenInstance(gen, manifest, out);
    }
    if (sub == kktCmd) return cmdCheckKkt(kkt, manifest, out);
    if (sub == estCmd) return cmdEstimate(est, common, manifest, out);
    if (sub == exCmd) return cmdExperiment(ex, common, manifest);
    return cmdEvalCorpus(corp, common, manifest, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exitCodeFor(e);
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace dirmc
