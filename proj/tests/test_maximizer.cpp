#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "dirmc/error.hpp"
#include "dirmc/maximizer.hpp"
#include "support.hpp"

using namespace dirmc;
using dirmc::testing::planted;

namespace {

void checkMonotone(const CoverResult& r) {
  for (std::size_t t = 1; t < r.valueTrace.size(); ++t) CHECK(r.valueTrace[t] >= r.valueTrace[t - 1] - 1e-13);
}

}  // namespace

TEST_CASE("identical topics leave the starting point fixed") {
  const std::vector<double> row{0.1, 0.2, 0.3, 0.4};
  const LdaInstance inst(TopicMatrix::fromRows({row, row, row}), SimplexPoint({0.25, 0.25, 0.25, 0.25}), 10.0);
  const SimplexPoint b0({0.2, 0.3, 0.5});
  const Eigen::VectorXd g = ldaGradient(inst, b0);
  for (int i = 0; i < 3; ++i) CHECK(g(i) == doctest::Approx(1.0).epsilon(1e-14));
  const auto r = coverMaximize(inst, CoverConfig{}, b0);
  for (int i = 0; i < 3; ++i) CHECK(r.point[i] == doctest::Approx(b0[i]).epsilon(1e-14));
}

TEST_CASE("Cover converges to the planted interior maximizer") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = planted(5, 500, 0, seed, 0.5);
    const auto res = findMaximizer(*inst);
    const auto& truth = inst->known()->thetaStar;
    double err = 0.0;
    for (int i = 0; i < 5; ++i) err = std::max(err, std::abs(res.report.thetaStar[i] - truth[i]));
    CHECK(err < 1e-6);
    CHECK(res.report.m() == 0);
    checkMonotone(res.cover);
  }
}

TEST_CASE("K=2 maximizer agrees with a grid search") {
  const auto inst = planted(2, 100, 0, 9, 1.0);
  const auto res = findMaximizer(*inst);
  double best = -INFINITY, arg = 0.0;
  for (int i = 1; i < 200000; ++i) {
    const double x = i / 200000.0;
    const double v = ldaValue(*inst, SimplexPoint({x, 1.0 - x}));
    if (v > best) {
      best = v;
      arg = x;
    }
  }
  CHECK(std::abs(res.report.thetaStar[0] - arg) < 1e-5);
}

TEST_CASE("Cover value trace is monotone on boundary instances") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto inst = planted(5, 400, 1 + seed % 3, seed);
    checkMonotone(coverMaximize(*inst, CoverConfig{}, SimplexPoint::uniform(5)));
  }
}

TEST_CASE("interior KKT report") {
  const auto inst = planted(4, 300, 0, 4, 0.5);
  const auto rep = kktReport(*inst, inst->known()->thetaStar, CoverConfig{});
  CHECK(rep.m() == 0);
  CHECK(rep.lambda.empty());
  CHECK(rep.strictComplementarity);
  CHECK(std::isinf(rep.minLambda));
  CHECK(rep.kktResidual < 1e-6);
  const Eigen::MatrixXd a = criticalConeBasis(4, 0);
  CHECK((a.transpose() * rep.hessian * a - rep.reducedHessian).norm() < 1e-10 * rep.reducedHessian.norm());
  CHECK(rep.reducedHessianNegativeDefinite);
}

TEST_CASE("boundary plant and recover") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t m = 1 + seed % 3;
    const auto inst = planted(5, 1000, m, seed);
    const auto res = findMaximizer(*inst);
    const auto& known = *inst->known();
    REQUIRE(res.report.activeSet == known.activeSet);
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(std::abs(res.report.lambda[i] - known.lambda[i]) < 1e-4);
      CHECK(res.report.lambda[i] >= 0.0);
      CHECK(res.report.lambda[i] * res.report.thetaStar[known.activeSet[i]] == 0.0);
    }
  }
}

TEST_CASE("critical cone basis") {
  Eigen::MatrixXd u = criticalConeBasis(3, 0);
  Eigen::MatrixXd expected(3, 2);
  expected << 1, 0, 0, 1, -1, -1;
  CHECK(u == expected);
  u = criticalConeBasis(3, 1);
  CHECK(u.cols() == 1);
  CHECK(u(0, 0) == 0.0);
  CHECK(u(1, 0) == 1.0);
  CHECK(u(2, 0) == -1.0);
  for (std::size_t m = 0; m < 5; ++m) {
    const auto b = criticalConeBasis(5, m);
    CHECK((Eigen::RowVectorXd::Ones(5) * b).norm() == 0.0);
  }
  CHECK(criticalConeBasis(4, 3).cols() == 0);
  CHECK_THROWS_AS(criticalConeBasis(3, 3), ValidationError);
}

TEST_CASE("reduced Hessian") {
  const auto r = reducedHessian(-Eigen::MatrixXd::Identity(3, 3), criticalConeBasis(3, 0));
  Eigen::Matrix2d expected;
  expected << -2, -1, -1, -2;
  CHECK(r.matrix.isApprox(expected));
  CHECK(r.negativeDefinite);
  CHECK_FALSE(reducedHessian(Eigen::MatrixXd::Zero(3, 3), criticalConeBasis(3, 0)).negativeDefinite);
}

TEST_CASE("a wrong maximizer is rejected") {
  const auto inst = planted(4, 300, 0, 5, 0.5);
  CHECK_THROWS_AS(kktReport(*inst, SimplexPoint::uniform(4), CoverConfig{}), KktViolation);
}

TEST_CASE("Cover rejects bad inputs") {
  const auto inst = planted(3, 50, 0, 6, 0.5);
  CHECK_THROWS_AS(coverMaximize(*inst, CoverConfig{}, SimplexPoint({0.0, 0.5, 0.5})), ValidationError);
  CoverConfig bad;
  bad.maxIters = -1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}
