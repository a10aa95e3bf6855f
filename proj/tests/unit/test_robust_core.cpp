#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rhmm/error.hpp"
#include "rhmm/measure_change.hpp"
#include "rhmm/robust_core.hpp"

using namespace rhmm;

TEST_SUITE("robust_core") {
  TEST_CASE("huber clipping") {
    CHECK(huber_clip(1.0, 2.0) == 1.0);
    CHECK(huber_clip(4.0, 2.0) == 2.0);
    CHECK(huber_clip(-4.0, 2.0) == -2.0);
    const auto v = huber_clip(std::array<double, 2>{3.0, 4.0}, 1.0);
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[1] == doctest::Approx(0.8));
    CHECK(huber_clip(5.0, std::numeric_limits<double>::infinity()) == 5.0);
    CHECK_THROWS_AS(huber_clip(1.0, 0.0), InvalidArgument);
  }

  TEST_CASE("weighted median") {
    CHECK(weighted_median(std::vector<double>{1, 2, 3}, std::vector<double>{1, 1, 1}) == 2.0);
    CHECK(weighted_median(std::vector<double>{10, 0}, std::vector<double>{0.7, 0.3}) == 10.0);
    CHECK_THROWS_AS(weighted_median(std::vector<double>{1, 2}, std::vector<double>{0, 0}), InvalidArgument);
    CHECK_THROWS_AS(weighted_median(std::vector<double>{1, 2}, std::vector<double>{1, -1}), InvalidArgument);
  }

  TEST_CASE("weighted median minimizes the weighted absolute deviation") {
    std::mt19937_64 g(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
      const std::size_t n = 2 + rep % 9;
      std::vector<double> y(n), w(n);
      for (std::size_t k = 0; k < n; ++k) {
        y[k] = 10.0 * u(g) - 5.0;
        w[k] = u(g);
      }
      auto loss = [&](double f) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += w[k] * std::abs(y[k] - f);
        return s;
      };
      double best = std::numeric_limits<double>::infinity();
      for (double c : y) best = std::min(best, loss(c));
      CHECK(loss(weighted_median(y, w)) == doctest::Approx(best).epsilon(1e-12));
    }
  }

  TEST_CASE("weighted MAD") {
    std::mt19937_64 g(3);
    std::normal_distribution<double> z;
    std::vector<double> y(100000), w(100000, 1.0);
    for (double& v : y) v = z(g);
    const WeightedSample s(y, w);
    CHECK(weighted_mad(s, weighted_median(s), normal_quantile(0.75)) == doctest::Approx(1.0).epsilon(0.01));
    const WeightedSample flat(std::vector<double>(5, 2.0), std::vector<double>(5, 1.0));
    CHECK(weighted_mad(flat, 2.0, 0.6745) == 0.0);
    std::vector<double> y3(y.begin(), y.begin() + 999);
    std::vector<double> y3s(y3);
    for (double& v : y3s) v *= 3.0;
    const WeightedSample a(y3, std::vector<double>(999, 1.0)), b(y3s, std::vector<double>(999, 1.0));
    CHECK(weighted_mad(b, 0.3, 0.6745) == doctest::Approx(3.0 * weighted_mad(a, 0.1, 0.6745)).epsilon(1e-12));
  }

  TEST_CASE("Monte-Carlo consistency factors") {
    const std::vector<double> equal(2000, 1.0);
    CHECK(std::abs(mc_consistency_factor(equal, 2000, 1) - 0.6745) < 0.01);
    std::vector<double> single(50, 0.0);
    single[7] = 1.0;
    CHECK(std::abs(mc_consistency_factor(single, 20000, 1) - std::sqrt(2.0 / M_PI)) < 0.01);
    CHECK(mc_consistency_factor(equal, 1000, 9) == mc_consistency_factor(equal, 1000, 9));
  }

  TEST_CASE("finite-sample breakdown point") {
    std::vector<double> w{0.05, 0.05, 0.05, 0.05, 0.05, 0.1, 0.1, 0.1, 0.2, 0.25};
    CHECK(fsbp(w) == Fraction{3, 10});
    CHECK(fsbp(std::vector<double>(10, 1.0)) == Fraction{5, 10});
    std::vector<double> one(8, 0.0);
    one[2] = 1.0;
    CHECK(fsbp(one) == Fraction{1, 8});
    CHECK(fsbp(w).value() == doctest::Approx(0.3));
  }

  TEST_CASE("MBRE influence function lies on the sphere of radius b") {
    const MbreConstants c;
    for (double u = -50.0; u <= 50.0; u += 0.37) {
      const MbrePsi p = mbre_if(u, c);
      CHECK(std::hypot(p.loc, p.scale) == doctest::Approx(c.b).epsilon(1e-14));
      const MbrePsi q = mbre_if(-u, c);
      CHECK(q.loc == doctest::Approx(-p.loc).epsilon(1e-14));
      CHECK(q.scale == doctest::Approx(p.scale).epsilon(1e-14));
    }
  }
}
