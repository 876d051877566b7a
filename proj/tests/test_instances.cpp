#include <cmath>

#include "doctest.h"
#include "dirmc/instances.hpp"
#include "dirmc/laplace.hpp"
#include "dirmc/maximizer.hpp"
#include "support.hpp"

using namespace dirmc;
using dirmc::testing::planted;

TEST_CASE("interior instances have theta_true as the maximizer") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto inst = planted(5, 500, 0, seed);
    const auto& known = *inst->known();
    const Eigen::VectorXd g = ldaGradient(*inst, known.thetaStar);
    for (Eigen::Index i = 0; i < g.size(); ++i) CHECK(std::abs(g(i) - 1.0) < 1e-8);
    const auto found = findMaximizer(*inst).report;
    CHECK(found.m() == 0);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(found.thetaStar[i] - known.thetaStar[i]) < 1e-6);
  }
}

TEST_CASE("planted boundary instances are recovered") {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const std::size_t m = 1 + seed % 3;
    const auto inst = planted(5, 1000, m, seed);
    const auto& known = *inst->known();
    REQUIRE(known.activeSet.size() == m);
    const auto rep = findMaximizer(*inst).report;
    CHECK(rep.activeSet == known.activeSet);
    for (std::size_t j = 0; j < m; ++j) {
      CHECK(known.lambda[j] >= 0.2);
      CHECK(known.lambda[j] <= 1.0);
      CHECK(std::abs(rep.lambda[j] - known.lambda[j]) < 1e-6);
    }
    const Eigen::VectorXd g = ldaGradient(*inst, known.thetaStar);
    for (std::size_t i = 0; i < 5; ++i) {
      if (known.thetaStar[i] > 0.0) CHECK(std::abs(g(static_cast<Eigen::Index>(i)) - 1.0) < 1e-8);
    }
  }
}

TEST_CASE("generator validation") {
  GeneratorConfig cfg;
  cfg.K = 2;
  cfg.m = 2;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.m = 0;
  cfg.lambdaMin = 0.5;
  cfg.lambdaMax = 0.4;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("a single topic gives theta* = 1") {
  const auto inst = planted(1, 50, 0, 3);
  CHECK(inst->known()->thetaStar[0] == 1.0);
  CHECK(ldaValue(*inst, SimplexPoint({1.0})) <= 0.0);
}

TEST_CASE("sparsity-controlled topic matrices") {
  RandomStream s(11);
  const TopicMatrix block = genSparsityControlledPhi(4, 40, 0.0, s);
  for (std::size_t v = 0; v < 40; ++v)
    for (std::size_t k = 0; k < 4; ++k)
      if (v % 4 != k) CHECK(block(k, v) == 0.0);
  for (double eps : {1e-8, 0.1, 0.9}) {
    const TopicMatrix phi = genSparsityControlledPhi(6, 120, eps, s);
    const auto m = measureSparsity(phi);
    CHECK(m.b1Holds);
    CHECK(std::abs(m.epsilon - eps) < 1e-9 * std::max(1.0, eps));
    for (std::size_t k = 0; k < 6; ++k) {
      double sum = 0.0;
      for (std::size_t v = 0; v < 120; ++v) sum += phi(k, v);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("sampled documents") {
  RandomStream s(12);
  const TopicMatrix phi = TopicMatrix::fromRows({{0.5, 0.5, 0.0}, {0.0, 0.0, 1.0}});
  const auto doc = sampleDocument(phi, SimplexPoint({1.0, 0.0}), 200, s);
  CHECK(doc.n == 200.0);
  CHECK(doc.counts.count(2) == 0);
  const LdaInstance inst = toLdaInstance(phi, doc);
  CHECK(inst.p()[0] + inst.p()[1] == doctest::Approx(1.0));

  CorpusDocument one;
  one.counts[1] = 1.0;
  one.n = 1.0;
  const LdaInstance single = toLdaInstance(phi, one);
  const auto rep = findMaximizer(single).report;
  CHECK(rep.thetaStar[0] == doctest::Approx(1.0));
  CHECK(rep.m() == 1);

  CorpusDocument outOfRange;
  outOfRange.counts[7] = 2.0;
  outOfRange.n = 2.0;
  CHECK_THROWS_AS(toLdaInstance(phi, outOfRange), ValidationError);
}
