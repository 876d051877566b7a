#include <cmath>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "dirmc/error.hpp"
#include "dirmc/simplex.hpp"

using namespace dirmc;

TEST_CASE("uniform Dirichlet draws have mean 1/3 per coordinate") {
  RandomStream s(11);
  const auto a = DirichletParams::symmetric(3, 1.0);
  const int n = 100000;
  std::vector<double> sum(3, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto t = sampleDirichlet(a, s);
    for (int k = 0; k < 3; ++k) sum[k] += t[k];
  }
  const double se = std::sqrt((1.0 / 18.0) / n);  // var = 2/(9*4)
  for (int k = 0; k < 3; ++k) CHECK(std::abs(sum[k] / n - 1.0 / 3.0) < 3 * se);
}

TEST_CASE("Dir(2,2) first coordinate has variance 1/20") {
  RandomStream s(12);
  const DirichletParams a({2.0, 2.0});
  const int n = 100000;
  std::vector<double> x(n);
  for (auto& v : x) v = sampleDirichlet(a, s)[0];
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = (v - mean) * (v - mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n - 1;
  m4 /= n;
  const double expected = 2.0 * 2.0 / (16.0 * 5.0);
  const double se = std::sqrt((m4 - m2 * m2) / n);
  CHECK(std::abs(m2 - expected) < 3 * se);
}

TEST_CASE("small-alpha draws stay normalized") {
  RandomStream s(13);
  const auto a = DirichletParams::symmetric(5, 0.1);
  for (int i = 0; i < 2000; ++i) {
    const auto t = sampleDirichlet(a, s);
    const double total = std::accumulate(t.vec().begin(), t.vec().end(), 0.0);
    CHECK(std::abs(total - 1.0) < 1e-12);
    for (double c : t.vec()) CHECK(c >= 0.0);
  }
}

TEST_CASE("draws with logs agree with the coordinates") {
  RandomStream s(14);
  const auto a = DirichletParams::symmetric(4, 0.05);
  for (int i = 0; i < 200; ++i) {
    const auto d = sampleDirichletWithLogs(a, s);
    for (std::size_t k = 0; k < 4; ++k)
      if (d.point[k] > 1e-300) CHECK(std::abs(std::exp(d.logCoords[k]) - d.point[k]) <= 1e-12 * d.point[k] + 1e-300);
  }
}

TEST_CASE("Dirichlet log density") {
  CHECK(logDirichletDensity(DirichletParams({1, 1, 1}), SimplexPoint({0.2, 0.3, 0.5})) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(logDirichletDensity(DirichletParams({2, 1}), SimplexPoint({0.0, 1.0})) == -INFINITY);
  // B(1/2,1/2) = pi, so the density at (1/2,1/2) is 2/pi.
  CHECK(logDirichletDensity(DirichletParams({0.5, 0.5}), SimplexPoint({0.5, 0.5})) ==
        doctest::Approx(std::log(2.0 / std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("log multivariate Beta") {
  CHECK(logMultivariateBeta(std::vector<double>{1.0, 1.0}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(logMultivariateBeta(std::vector<double>{2.0, 2.0}) == doctest::Approx(std::log(1.0 / 6.0)).epsilon(1e-14));
  const double oracle = std::lgamma(0.1) + std::lgamma(3.7) + std::lgamma(12.0) - std::lgamma(15.8);
  CHECK(logMultivariateBeta(std::vector<double>{0.1, 3.7, 12.0}) == doctest::Approx(oracle).epsilon(1e-13));
}

TEST_CASE("KL divergence") {
  const SimplexPoint t({0.3, 0.7});
  CHECK(klDivergence(t, t) == 0.0);
  CHECK(klDivergence(SimplexPoint({1.0, 0.0}), SimplexPoint({0.5, 0.5})) == doctest::Approx(std::log(2.0)));
  CHECK(klDivergence(SimplexPoint({0.5, 0.5}), SimplexPoint({0.25, 0.75})) ==
        doctest::Approx(0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0)).epsilon(1e-14));
  CHECK(klDivergence(SimplexPoint({0.5, 0.5}), SimplexPoint({0.0, 1.0})) == INFINITY);
}

TEST_CASE("truncated simplex membership") {
  const SimplexPoint star({0.5, 0.5});
  for (auto mode : {TruncationMode::kAbsolute, TruncationMode::kRelative}) {
    const TruncationSpec spec(0.1, mode, star);
    CHECK(inTruncatedSimplex(star, star, spec));
  }
  CHECK_FALSE(inTruncatedSimplex(SimplexPoint({0.05, 0.95}), star,
                                 TruncationSpec(0.1, TruncationMode::kAbsolute, star)));
  const SimplexPoint star3({0.6, 0.4, 0.0});
  CHECK_FALSE(inTruncatedSimplex(SimplexPoint({0.05, 0.9, 0.05}), star3,
                                 TruncationSpec(0.1, TruncationMode::kRelative, star3)));
  CHECK(inTruncatedSimplex(SimplexPoint({0.07, 0.9, 0.03}), star3,
                           TruncationSpec(0.1, TruncationMode::kRelative, star3)));
}

TEST_CASE("simplex validation") {
  CHECK_THROWS_AS(SimplexPoint({0.5, 0.6}), ValidationError);
  CHECK_THROWS_AS(SimplexPoint({-0.1, 1.1}), ValidationError);
  CHECK_THROWS_AS(SimplexPoint(std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(DirichletParams({1.0, 0.0}), ValidationError);
  const SimplexPoint p({0.1, 0.2, 0.7});
  CHECK(p.vec() == std::vector<double>{0.1, 0.2, 0.7});
}

TEST_CASE("log-sum-exp") {
  CHECK(logSumExp(std::vector<double>{-INFINITY, -INFINITY}) == -INFINITY);
  CHECK(logSumExp(std::vector<double>{1000.0, 1000.0}) == doctest::Approx(1000.0 + std::log(2.0)));
  CHECK(logAddExp(-INFINITY, 3.0) == 3.0);
  CHECK(logAddExp(-745.0, -745.0) == doctest::Approx(-745.0 + std::log(2.0)));
}

TEST_CASE("random streams are reproducible and independent") {
  RandomStream a(5, 3), b(5, 3), c(5, 4);
  const auto x = a.nextU64();
  CHECK(x == b.nextU64());
  CHECK(x != c.nextU64());
}
