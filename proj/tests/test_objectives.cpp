#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "dirmc/objectives.hpp"
#include "support.hpp"

using namespace dirmc;
using dirmc::testing::planted;

namespace {

double negEntropy(const SimplexPoint& p) {
  double s = 0.0;
  for (double x : p.vec())
    if (x > 0.0) s += x * std::log(x);
  return s;
}

SimplexPoint randomInterior(std::size_t k, RandomStream& s) {
  return sampleDirichlet(DirichletParams::symmetric(k, 3.0), s);
}

}  // namespace

TEST_CASE("single topic gives the negative entropy of p") {
  const SimplexPoint p({0.2, 0.5, 0.3});
  const LdaInstance inst(TopicMatrix::fromRows({p.vec()}), p, 10.0);
  CHECK(ldaValue(inst, SimplexPoint({1.0})) == doctest::Approx(negEntropy(p)).epsilon(1e-14));
  CHECK(ldaGradient(inst, SimplexPoint({1.0}))(0) == doctest::Approx(1.0));
}

TEST_CASE("exact mixture attains the negative entropy of p") {
  const auto inst = planted(4, 200, 0, 3);
  const auto& theta = inst->known()->thetaStar;
  CHECK(ldaValue(*inst, theta) == doctest::Approx(negEntropy(inst->p())).epsilon(1e-12));
  RandomStream s(1);
  for (int i = 0; i < 50; ++i) {
    const auto t = randomInterior(4, s);
    const double v = ldaValue(*inst, t);
    CHECK(v <= 0.0);
    CHECK(v <= ldaValue(*inst, theta) + 1e-12);
  }
}

TEST_CASE("gradient identities and finite differences") {
  RandomStream s(2);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto inst = planted(5, 300, 0, seed, 0.5);
    const auto theta = randomInterior(5, s);
    const Eigen::VectorXd g = ldaGradient(*inst, theta);
    const Eigen::Map<const Eigen::VectorXd> t(theta.vec().data(), 5);
    CHECK(t.dot(g) == doctest::Approx(1.0).epsilon(1e-10));

    const Eigen::MatrixXd h = ldaHessian(*inst, theta);
    CHECK(((-h * t) - g).norm() / g.norm() < 1e-9);

    // H extends to the positive orthant, so coordinate-wise differences apply.
    const double step = 1e-6;
    for (int k = 0; k < 5; ++k) {
      auto up = theta.vec(), dn = theta.vec();
      up[k] += step;
      dn[k] -= step;
      const double fUp = ldaEvaluate(*inst, up, false, false).value;
      const double fDn = ldaEvaluate(*inst, dn, false, false).value;
      CHECK(std::abs((fUp - fDn) / (2 * step) - g(k)) / std::abs(g(k)) < 1e-5);
      const Eigen::VectorXd gUp = *ldaEvaluate(*inst, up, true, false).gradient;
      const Eigen::VectorXd gDn = *ldaEvaluate(*inst, dn, true, false).gradient;
      const Eigen::VectorXd fd = (gUp - gDn) / (2 * step);
      CHECK((fd - h.col(k)).norm() / h.col(k).norm() < 1e-4);
    }

    for (int r = 0; r < 20; ++r) {
      Eigen::VectorXd d = Eigen::VectorXd::NullaryExpr(5, [&] { return s.normal(); });
      d.array() -= d.mean();
      CHECK(d.dot(h * d) <= 0.0);
    }
  }
}

TEST_CASE("KL objective") {
  const KlObjective kl(SimplexPoint({0.5, 0.5}), 0.0);
  CHECK(evaluate(kl, SimplexPoint({0.5, 0.5})) == 0.0);
  CHECK(evaluate(kl, SimplexPoint({0.25, 0.75})) ==
        doctest::Approx(-(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0))).epsilon(1e-14));
  CHECK(evaluate(kl, SimplexPoint({0.0, 1.0})) == -INFINITY);
  const KlObjective shifted(SimplexPoint({0.2, 0.8}), -1.5);
  CHECK(evaluate(shifted, SimplexPoint({0.2, 0.8})) == -1.5);
}

TEST_CASE("KL Hessian at the maximizer") {
  auto diag = [](const KlObjective& o) { return klObjectiveHessianAtStar(o); };
  Eigen::MatrixXd h = diag(KlObjective(SimplexPoint({0.5, 0.5}), 0.0));
  CHECK(h.isApprox(Eigen::Vector2d(-2, -2).asDiagonal().toDenseMatrix()));
  h = diag(KlObjective(SimplexPoint({1.0, 0.0}), 0.0));
  CHECK(h(0, 0) == -1.0);
  CHECK(h(1, 1) == 0.0);
  h = diag(KlObjective(SimplexPoint({0.2, 0.3, 0.5}), 0.0));
  CHECK(h(0, 0) == doctest::Approx(-5.0));
  CHECK(h(1, 1) == doctest::Approx(-10.0 / 3.0));
  CHECK(h(2, 2) == doctest::Approx(-2.0));
  CHECK(h(0, 1) == 0.0);
}

TEST_CASE("closed-form expectation of exp(n Hhat) agrees with log-Beta arithmetic") {
  const SimplexPoint star({0.2, 0.3, 0.5});
  const KlObjective kl(star, 0.0);
  const auto alpha = DirichletParams::symmetric(3, 1.0);
  const double n = 50.0;
  std::vector<double> shifted;
  double ent = 0.0;
  for (int i = 0; i < 3; ++i) {
    shifted.push_back(1.0 + n * star[i]);
    ent += star[i] * std::log(star[i]);
  }
  const double oracle = std::lgamma(shifted[0]) + std::lgamma(shifted[1]) + std::lgamma(shifted[2]) -
                        std::lgamma(3.0 + n) + std::lgamma(3.0) - n * ent;
  CHECK(kl.logExpectation(alpha, n) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(kl.logExpectation(alpha, 0.0) == doctest::Approx(0.0));
}
