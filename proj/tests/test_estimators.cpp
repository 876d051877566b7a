#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "dirmc/estimators.hpp"
#include "dirmc/maximizer.hpp"
#include "dirmc/quadrature.hpp"
#include "support.hpp"

using namespace dirmc;
using dirmc::testing::planted;

namespace {

EstimatorConfig config(std::size_t samples, std::uint64_t seed, double gamma = 0.9) {
  EstimatorConfig c;
  c.numSamples = samples;
  c.seed = seed;
  c.gamma = gamma;
  return c;
}

// |log a - log b| in units of the standard error of the estimate a
double zScore(const LogEstimate& est, double logTruth) {
  return std::abs(std::exp(est.logMean - logTruth) - 1.0) / std::exp(est.logStdError() - logTruth);
}

}  // namespace

TEST_CASE("constant objective has zero variance") {
  const ConstantObjective zero(4, 0.0);
  const auto alpha = DirichletParams::symmetric(4, 0.5);
  const auto mc = plainMC(zero, alpha, 1000.0, config(1000, 1));
  CHECK(mc.logMean == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(mc.logVariance == -std::numeric_limits<double>::infinity());

  const ConstantObjective c(3, -0.25);
  const auto mc2 = plainMC(c, DirichletParams::symmetric(3, 1.0), 8.0, config(100, 2));
  CHECK(mc2.logMean == doctest::Approx(-2.0).epsilon(1e-14));
}

TEST_CASE("n = 0 gives log I = 0") {
  const auto inst = planted(3, 100, 0, 2);
  const LdaObjective obj(inst);
  const auto alpha = DirichletParams::symmetric(3, 0.3);
  CHECK(plainMC(obj, alpha, 0.0, config(500, 3)).logMean == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("estimators recover the Hhat closed form") {
  const KlObjective kl(SimplexPoint({0.2, 0.3, 0.5}), -1.0);
  const auto alpha = DirichletParams::symmetric(3, 1.0);
  const double truth = kl.logExpectation(alpha, 100.0);
  const auto mc = plainMC(kl, alpha, 100.0, config(100000, 5));
  CHECK(zScore(mc, truth) < 3.0);

  auto cfg = config(20000, 6);
  cfg.truncation.emplace(0.01, TruncationMode::kRelative, kl.thetaStar());
  const auto is = importanceSampling(kl, alpha, 100.0, kl.thetaStar(), cfg);
  CHECK(zScore(is, truth) < 3.0);
  CHECK(is.logStdError() < mc.logStdError());
}

TEST_CASE("the control variate is exact for the surrogate itself") {
  const KlObjective kl(SimplexPoint({0.1, 0.6, 0.3}), -0.5);
  const auto alpha = DirichletParams::symmetric(3, 0.7);
  const auto cv = controlVariate(kl, kl, alpha, 200.0, config(2000, 9));
  CHECK(cv.rhoSquared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cv.estimate.logMean == doctest::Approx(kl.logExpectation(alpha, 200.0)).epsilon(1e-9));
  CHECK(cv.logKnownMean == doctest::Approx(kl.logExpectation(alpha, 200.0)).epsilon(1e-14));
}

TEST_CASE("a zero control-variate coefficient reduces to plain MC") {
  const auto inst = planted(3, 100, 0, 4);
  const LdaObjective obj(inst);
  const auto rep = findMaximizer(*inst).report;
  const KlObjective kl(rep.thetaStar, rep.hAtStar);
  const auto alpha = DirichletParams::symmetric(3, 0.5);
  auto cfg = config(3000, 12);
  cfg.fixedCvCoefficient = 0.0;
  const auto cv = controlVariate(obj, kl, alpha, 50.0, cfg);
  const auto mc = plainMC(obj, alpha, 50.0, config(3000, 12));
  CHECK(cv.estimate.logMean == doctest::Approx(mc.logMean).epsilon(1e-12));
}

TEST_CASE("a zero proposal concentration reduces IS to plain MC") {
  const auto inst = planted(3, 100, 0, 5);
  const LdaObjective obj(inst);
  const auto rep = findMaximizer(*inst).report;
  const auto alpha = DirichletParams::symmetric(3, 0.5);
  auto cfg = config(5000, 13);
  cfg.proposalConcentration = 0.0;
  const auto is = importanceSampling(obj, alpha, 50.0, rep.thetaStar, cfg);
  const auto mc = plainMC(obj, alpha, 50.0, config(5000, 14));
  CHECK(std::abs(is.logMean - mc.logMean) < 3.0 * std::exp(std::max(is.logStdError(), mc.logStdError()) - mc.logMean));
  CHECK(is.truncatedFraction == 0.0);
}

TEST_CASE("K=2 estimators agree with quadrature") {
  const auto inst = planted(2, 100, 0, 21, 1.0);
  const LdaObjective obj(inst);
  const auto rep = findMaximizer(*inst).report;
  const KlObjective kl(rep.thetaStar, rep.hAtStar);
  const auto alpha = DirichletParams::symmetric(2, 1.0);
  QuadratureOptions qo;
  qo.peak = rep.thetaStar;
  const double n = 500.0;
  const auto q = quadratureReference(obj, alpha, n, 1, qo);
  REQUIRE(q.converged);
  auto isCfg = config(20000, 31);
  isCfg.truncation.emplace(0.1, TruncationMode::kRelative, rep.thetaStar);
  CHECK(zScore(importanceSampling(obj, alpha, n, rep.thetaStar, isCfg), q.logValue) < 3.0);
  CHECK(zScore(plainMC(obj, alpha, n, config(200000, 32)), q.logValue) < 3.0);
  const auto cv = controlVariate(obj, kl, alpha, n, config(20000, 33));
  CHECK(zScore(cv.estimate, q.logValue) < 3.0);
  CHECK(cv.rhoSquared > 0.5);
}

TEST_CASE("correlation is invariant under shifts of either objective") {
  const auto inst = planted(3, 100, 0, 6);
  const LdaObjective obj(inst);
  const auto rep = findMaximizer(*inst).report;
  const KlObjective kl(rep.thetaStar, rep.hAtStar);
  const KlObjective klShifted(rep.thetaStar, rep.hAtStar - 3.0);
  const ShiftedObjective shifted(obj, 2.0);
  const auto alpha = DirichletParams::symmetric(3, 0.5);
  for (auto mode : {RhoSampling::kPrior, RhoSampling::kImportance}) {
    const double a = empiricalRhoSquared(obj, kl, alpha, 100.0, config(4000, 7), mode);
    const double b = empiricalRhoSquared(shifted, klShifted, alpha, 100.0, config(4000, 7), mode);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("weighted correlation") {
  const std::vector<double> w{0.0, 0.0, 0.0, -std::numeric_limits<double>::infinity()};
  const std::vector<double> u{0.0, 1.0, 2.0, 50.0};
  const std::vector<double> v{1.0, 2.0, 3.0, -50.0};
  CHECK(weightedRhoSquared(w, u, v) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> v2{0.0, std::log(2.0), 0.0, 0.0};  // exp: 1, 2, 1
  CHECK(weightedRhoSquared(w, u, v2) < 0.5);
}

TEST_CASE("truncation discards samples outside the truncated simplex") {
  const KlObjective kl(SimplexPoint({0.25, 0.25, 0.5}), 0.0);
  const auto alpha = DirichletParams::symmetric(3, 1.0);
  auto cfg = config(20000, 40, 0.5);
  cfg.proposalConcentration = 0.0;  // proposal = prior, so the fraction is a prior probability
  cfg.truncation.emplace(0.4, TruncationMode::kRelative, kl.thetaStar());
  // lower bounds .1, .1, .2 sum to .4: accepted volume (1 - .4)^2 = .36
  const double frac = importanceSampling(kl, alpha, 10.0, kl.thetaStar(), cfg).truncatedFraction;
  CHECK(std::abs(frac - 0.64) < 4.0 * std::sqrt(0.64 * 0.36 / 20000.0));
}

TEST_CASE("gamma validation") {
  const KlObjective kl(SimplexPoint({0.5, 0.5}), 0.0);
  const auto alpha = DirichletParams::symmetric(2, 1.0);
  auto cfg = config(100, 1, 1.0);
  CHECK_THROWS_AS(importanceSampling(kl, alpha, 10.0, kl.thetaStar(), cfg), ValidationError);
  cfg.allowUnstableGamma = true;
  CHECK_NOTHROW(importanceSampling(kl, alpha, 10.0, kl.thetaStar(), cfg));
  auto neg = config(100, 1, -0.1);
  neg.allowUnstableGamma = true;
  CHECK_THROWS_AS(importanceSampling(kl, alpha, 10.0, kl.thetaStar(), neg), ValidationError);
  CHECK_THROWS_AS(plainMC(kl, alpha, 10.0, config(1, 1)), ValidationError);
}

TEST_CASE("results do not depend on the thread count") {
  const auto inst = planted(4, 200, 1, 8);
  const LdaObjective obj(inst);
  const auto rep = findMaximizer(*inst).report;
  const auto alpha = DirichletParams::symmetric(4, 0.3);
  auto a = config(10000, 77);
  a.chunkSize = 512;
  a.truncation.emplace(0.1, TruncationMode::kRelative, rep.thetaStar);
  auto b = a;
  b.threads = 4;
  const auto ea = importanceSampling(obj, alpha, 300.0, rep.thetaStar, a);
  const auto eb = importanceSampling(obj, alpha, 300.0, rep.thetaStar, b);
  CHECK(ea.logMean == eb.logMean);
  CHECK(ea.logVariance == eb.logVariance);
  CHECK(plainMC(obj, alpha, 300.0, a).logMean == plainMC(obj, alpha, 300.0, b).logMean);
}
