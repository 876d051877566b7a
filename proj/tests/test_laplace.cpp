#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "dirmc/estimators.hpp"
#include "dirmc/laplace.hpp"
#include "dirmc/maximizer.hpp"
#include "dirmc/quadrature.hpp"
#include "support.hpp"

using namespace dirmc;
using dirmc::testing::planted;

namespace {

MaximizerReport reportOf(const LdaInstance& inst) { return kktReport(inst, inst.known()->thetaStar, CoverConfig{}); }

}  // namespace

TEST_CASE("polynomial exponent") {
  const auto inst = planted(5, 1000, 1, 3);
  const auto rep = reportOf(*inst);
  CHECK(laplacePolyExponent(rep, DirichletParams::symmetric(5, 0.1)) == doctest::Approx(-1.6).epsilon(1e-15));
  const auto terms = betaAsymptoticTerms(DirichletParams({0.3, 1.0, 2.0, 0.7}), SimplexPoint({0.0, 0.2, 0.0, 0.8}));
  CHECK(terms.polyExponent == doctest::Approx(-0.5 - 2.3));
}

TEST_CASE("first-moment approximation against the Hhat closed form") {
  const KlObjective kl(SimplexPoint({0.2, 0.3, 0.5}), 0.0);
  const auto alpha = DirichletParams::symmetric(3, 1.0);
  const auto approx = laplaceFirstMoment(klReport(kl), alpha, 0.0);
  const double n = 1e4;
  const double ratio = std::exp(approx.evaluate(n) - kl.logExpectation(alpha, n));
  CHECK(ratio > 0.98);
  CHECK(ratio < 1.02);
}

TEST_CASE("K=2 first and second moments against quadrature") {
  const auto inst = planted(2, 100, 0, 21, 1.0);
  const auto rep = reportOf(*inst);
  const auto alpha = DirichletParams::symmetric(2, 1.0);
  const LdaObjective obj(inst);
  QuadratureOptions qo;
  qo.peak = rep.thetaStar;
  const double n = 5000;
  const auto first = laplaceFirstMoment(rep, alpha, rep.hAtStar);
  const auto second = laplaceSecondMomentPlain(rep, alpha, rep.hAtStar);
  CHECK(second.exponentialRate == 2.0 * rep.hAtStar);
  const auto q1 = quadratureReference(obj, alpha, n, 1, qo);
  const auto q2 = quadratureReference(obj, alpha, n, 2, qo);
  CHECK(q1.converged);
  CHECK(q2.converged);
  CHECK(std::abs(std::exp(first.evaluate(n) - q1.logValue) - 1.0) < 0.05);
  CHECK(std::abs(std::exp(second.evaluate(n) - q2.logValue) - 1.0) < 0.05);
}

TEST_CASE("plain-MC variance is dominated by the second moment") {
  const auto inst = planted(5, 1000, 1, 4);
  const auto rep = reportOf(*inst);
  const auto alpha = DirichletParams::symmetric(5, 0.1);
  const double n = 1e4;
  const double logFirstSq = 2.0 * laplaceFirstMoment(rep, alpha, rep.hAtStar).evaluate(n);
  const double logSecond = laplaceSecondMomentPlain(rep, alpha, rep.hAtStar).evaluate(n);
  CHECK(logFirstSq - logSecond < -5.0);
}

TEST_CASE("IS second-moment constant equals the first-moment constant at 2n") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const std::size_t m = seed % 4;
    const auto inst = planted(5, 1000, m, seed);
    const auto rep = reportOf(*inst);
    const auto alpha = DirichletParams::symmetric(5, 0.1 * static_cast<double>(seed));
    const auto is = laplaceSecondMomentIS(rep, alpha, rep.hAtStar);
    const auto first = laplaceFirstMoment(rep, alpha, rep.hAtStar);
    for (double n : {100.0, 1e4}) CHECK(is.evaluate(n) == doctest::Approx(first.evaluate(2 * n)).epsilon(1e-12));
    CHECK(is.polyExponent == first.polyExponent);
    CHECK(is.exponentialRate == 2.0 * rep.hAtStar);
  }
}

TEST_CASE("interior IS second-moment constant") {
  const auto inst = planted(4, 300, 0, 8, 0.5);
  const auto rep = reportOf(*inst);
  const auto alpha = DirichletParams::symmetric(4, 0.7);
  const auto is = laplaceSecondMomentIS(rep, alpha, rep.hAtStar);
  const double expected = logDirichletDensity(alpha, rep.thetaStar) + 1.5 * std::log(std::numbers::pi) -
                          0.5 * logDetNegDef(rep.reducedHessian);
  CHECK(is.logConstant == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("IS second moment matches its asymptotic form") {
  const auto inst = planted(2, 100, 0, 31, 1.0);
  const auto rep = reportOf(*inst);
  const auto alpha = DirichletParams::symmetric(2, 1.0);
  const LdaObjective obj(inst);
  const double n = 1e4;
  EstimatorConfig cfg;
  cfg.numSamples = 100000;
  cfg.gamma = 0.5;
  cfg.seed = 17;
  cfg.truncation.emplace(0.1, TruncationMode::kRelative, rep.thetaStar);
  const auto est = importanceSampling(obj, alpha, n, rep.thetaStar, cfg);
  // E_q[w^2] = B(eta)/B(alpha) e^{-c theta*.log theta*} E[e^{2nH + c KL} 1]
  const auto eta = isProposal(alpha, n, rep.thetaStar, cfg);
  double ent = 0.0;
  for (double t : rep.thetaStar.vec()) ent += t * std::log(t);
  const double c = std::pow(n, cfg.gamma);
  const double logTarget = est.logSecondMoment - (logMultivariateBeta(eta) - logMultivariateBeta(alpha) - c * ent);
  const double ratio = std::exp(laplaceSecondMomentIS(rep, alpha, rep.hAtStar).evaluate(n) - logTarget);
  CHECK(ratio > 0.9);
  CHECK(ratio < 1.1);
}

TEST_CASE("Beta function asymptotics") {
  const DirichletParams a3({0.5, 1.0, 2.0});
  const SimplexPoint interior({0.2, 0.3, 0.5});
  const SimplexPoint face({0.0, 0.4, 0.6});
  for (const auto* star : {&interior, &face}) {
    const double x = 1e5;
    std::vector<double> shifted;
    for (std::size_t i = 0; i < 3; ++i) shifted.push_back(a3[i] + x * (*star)[i]);
    const double ratio = std::exp(betaAsymptotic(a3, *star, x) - logMultivariateBeta(shifted));
    CHECK(std::abs(ratio - 1.0) < 0.01);
  }
}

TEST_CASE("limiting correlation special cases") {
  const KlObjective kl(SimplexPoint({0.0, 0.3, 0.7}), -2.0);
  CHECK(limitingRhoSquared(klReport(kl), DirichletParams({0.4, 1.0, 1.0})) == doctest::Approx(1.0).epsilon(1e-12));

  // vertex maximizer with lambda = 1: the KKT factor 4 lambda / (1 + lambda)^2 is 1
  const KlObjective vertex(SimplexPoint::vertex(3, 2), 0.0);
  CHECK(limitingRhoSquared(klReport(vertex), DirichletParams({0.3, 2.5, 1.0})) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("limiting correlation lies in [0,1]") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const std::size_t m = seed % 4;
    const auto inst = planted(5, 500, m, seed);
    const auto rep = reportOf(*inst);
    const double r = limitingRhoSquared(rep, DirichletParams::symmetric(5, 0.05 * static_cast<double>(seed)));
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    if (m == 0) {
      const double ri = limitingRhoSquaredInterior(rep);
      CHECK(ri >= 0.0);
      CHECK(ri <= 1.0);
    }
  }
}

TEST_CASE("reduced KL Hessian determinant") {
  const KlObjective kl(SimplexPoint({0.0, 0.1, 0.2, 0.3, 0.4}), 0.0);
  const auto rep = klReport(kl);
  const Eigen::MatrixXd r = reducedKlHessian(rep);
  CHECK(r.rows() == 3);
  CHECK((-r).determinant() == doctest::Approx(1.0 / (0.1 * 0.2 * 0.3 * 0.4)).epsilon(1e-10));
}

TEST_CASE("interior limiting correlation against the empirical correlation") {
  const auto inst = planted(3, 300, 0, 12, 0.5);
  const auto rep = reportOf(*inst);
  const auto alpha = DirichletParams::symmetric(3, 1.0);
  const LdaObjective obj(inst);
  const KlObjective kl(rep.thetaStar, rep.hAtStar);
  EstimatorConfig cfg;
  cfg.numSamples = 100000;
  cfg.seed = 4;
  const double hat = empiricalRhoSquared(obj, kl, alpha, 1e4, cfg, RhoSampling::kImportance);
  const double limit = limitingRhoSquared(rep, alpha);
  CHECK(std::abs(hat / limit - 1.0) < 0.1);
  CHECK(limitingRhoSquaredInterior(rep) == doctest::Approx(limit).epsilon(1e-6));
}

TEST_CASE("sparsity report") {
  RandomStream s(3);
  const TopicMatrix block = genSparsityControlledPhi(5, 100, 0.0, s);
  const LdaInstance inst = interiorInstanceFor(block, 1000, s);
  const auto rep = kktReport(inst, inst.known()->thetaStar, CoverConfig{});
  const auto sp = sparsityReport(inst, rep);
  CHECK(sp.epsilon == 0.0);
  REQUIRE(sp.applicable);
  CHECK(*sp.lowerBound == 1.0);
  CHECK(std::abs(sp.epsilonZero * std::sqrt(sparsityF(sp.epsilonZero, sp.cMax1, sp.cMax2, 5)) - 0.5) < 1e-10);

  const TopicMatrix loose = genSparsityControlledPhi(5, 100, 2.0, s);
  const LdaInstance inst2 = interiorInstanceFor(loose, 1000, s);
  const auto sp2 = sparsityReport(inst2, kktReport(inst2, inst2.known()->thetaStar, CoverConfig{}));
  CHECK(sp2.epsilon >= sp2.epsilonZero);
  CHECK_FALSE(sp2.applicable);
  CHECK_FALSE(sp2.lowerBound.has_value());
  CHECK_FALSE(sp2.reason.empty());
}

TEST_CASE("sparsity-controlled topics hit the target") {
  RandomStream s(4);
  for (double eps : {0.0, 1e-7, 0.1, 1.0, 3.5}) {
    const TopicMatrix phi = genSparsityControlledPhi(10, 1000, eps, s);
    const auto m = measureSparsity(phi);
    CHECK(m.b1Holds);
    CHECK(std::abs(m.epsilon - eps) < 1e-9);
  }
}

TEST_CASE("ties in the dominant topic violate B1") {
  const TopicMatrix phi = TopicMatrix::fromRows({{0.5, 0.5}, {0.5, 0.5}});
  CHECK_FALSE(measureSparsity(phi).b1Holds);
}
