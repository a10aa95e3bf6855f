#include <doctest.h>

#include <cmath>
#include <random>

#include "rhmm/error.hpp"
#include "rhmm/measure_change.hpp"
#include "rhmm/recursive_filters.hpp"
#include "rhmm/simulator.hpp"

using namespace rhmm;

namespace {

RegimeModel one_state(double f, double s) { return RegimeModel(Matrix::identity(1), {f}, {s}); }

}  // namespace

TEST_SUITE("measure_change") {
  TEST_CASE("normal helpers") {
    CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(normal_quantile(0.75) == doctest::Approx(0.6744897501960817).epsilon(1e-14));
    CHECK_THROWS_AS(normal_quantile(1.0), InvalidArgument);
  }

  TEST_CASE("gamma direct values") {
    for (double y : {-3.0, 0.0, 0.7, 5.0}) CHECK(gamma(one_state(0.0, 1.0), y, 0) == doctest::Approx(1.0));
    CHECK(gamma(one_state(0.0, 2.0), 0.0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    // phi((y-f)/s)/(s phi(y)) = exp(-(y-f)^2/(2 s^2) + y^2/2)/s
    const double y = 0.015, f = 0.01, s = 0.02;
    const double expect = std::exp(-0.5 * std::pow((y - f) / s, 2) + 0.5 * y * y) / s;
    CHECK(gamma(one_state(f, s), y, 0) == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("gamma overflow is a breakdown naming the state") {
    const RegimeModel m(Matrix::identity(2), {0.0, 0.0}, {1.0, 6.0});
    try {
      (void)gamma(m, 105.0, 1);
      FAIL("expected a breakdown");
    } catch (const BreakdownError& e) {
      CHECK(e.quantity() == "gamma[2]");
      CHECK(e.y() == 105.0);
    }
    CHECK(std::isfinite(log_gamma(m, ReferenceMeasure::standard(), 105.0, 1)));
  }

  TEST_CASE("reference measures") {
    CHECK_THROWS_AS(ReferenceMeasure(0.0), InvalidArgument);
    const std::vector<double> ys{1, 2, 3, 4, 100};
    CHECK(ReferenceMeasure::from_mad(ys).sigma_bar == doctest::Approx(1.0 / normal_quantile(0.75)));
    CHECK(ReferenceMeasure::from_sd(std::vector<double>{1, 1, 1}).sigma_bar == 1.0);
  }

  TEST_CASE("lambda tilde equals one when the model is the reference") {
    const ReferenceMeasure ref(2.5);
    for (double y : {-4.0, 0.0, 9.0}) {
      CHECK(lambda_tilde(one_state(0.0, 2.5), ref, y, StateDistribution::uniform(1)) ==
            doctest::Approx(1.0));
    }
  }

  TEST_CASE("reference scale cancels in normalized filters") {
    const RegimeModel m(Matrix::from_rows({{0.8, 0.3}, {0.2, 0.7}}), {-1.0, 1.0}, {1.0, 0.5});
    const std::vector<double> ys{0.3, -1.2, 0.8, 2.0, -0.4};
    FilterBank a = init_filters(StateDistribution::uniform(2));
    FilterBank b = a;
    for (double y : ys) {
      std::vector<double> ga(2), gb(2);
      for (std::size_t i = 0; i < 2; ++i) {
        ga[i] = gamma(m, ReferenceMeasure(1.0), y, i);
        gb[i] = gamma(m, ReferenceMeasure(2.0), y, i);
      }
      a = rescale(step(a, m, ga, y));
      b = rescale(step(b, m, gb, y));
    }
    const auto ea = normalize(a), eb = normalize(b);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(ea.state[i] == doctest::Approx(eb.state[i]).epsilon(1e-10));
      CHECK(ea.aux2[i] == doctest::Approx(eb.aux2[i]).epsilon(1e-10));
    }
  }

  TEST_CASE("severe outlier overflows the standard reference but not the MAD one") {
    const RegimeModel m = demo_model();
    const auto p = contaminate(simulate_hmm(m, stationary_distribution(m), demo_horizon, 1),
                               preset_contamination("severe", m), 1);
    const double y = p.observed[39];
    const ReferenceMeasure mad = ReferenceMeasure::from_mad(p.observed.values());
    const auto dist = stationary_distribution(m);
    CHECK(std::isfinite(lambda_tilde(m, mad, y, dist)));
    CHECK_THROWS_AS(lambda_tilde(m, ReferenceMeasure::standard(), y, dist), BreakdownError);
  }

  TEST_CASE("clipping calibration") {
    const RegimeModel m = demo_model();
    const auto dist = stationary_distribution(m);
    const ReferenceMeasure ref(10.0);
    const auto c1 = calibrate_clipping(m, ref, dist, 1.0, 20000, 5);
    CHECK(std::isinf(c1.clip_b));
    CHECK(c1.consistency == doctest::Approx(1.0).epsilon(0.05));
    const auto c95 = calibrate_clipping(m, ref, dist, 0.95, 20000, 5);
    const auto c90 = calibrate_clipping(m, ref, dist, 0.90, 20000, 5);
    CHECK(std::isfinite(c95.clip_b));
    CHECK(c90.clip_b < c95.clip_b);
    CHECK(c95.consistency * 0.95 == doctest::Approx(1.0).epsilon(1e-3));
    CHECK_THROWS_AS(calibrate_clipping(m, ref, dist, 0.0, 20000, 5), InvalidArgument);
    CHECK_THROWS_AS(calibrate_clipping(m, ref, dist, 0.95, 100, 5), InvalidArgument);
  }

  TEST_CASE("lambda bar is bounded and exact where clipping is inactive") {
    const RegimeModel m = demo_model();
    const auto dist = stationary_distribution(m);
    const ReferenceMeasure ref(10.0);
    const auto c = calibrate_clipping(m, ref, dist, 0.95, 20000, 5);
    const double cap = c.consistency * std::pow(c.mean_sqrt + c.clip_b, 2);
    for (double y = -1000.0; y <= 1000.0; y += 7.3) CHECK(lambda_bar(m, ref, c, y, dist) <= cap * (1 + 1e-12));
    // the reference is wider than every state, so lambda~ vanishes in the tails
    const double floor_value = c.consistency * std::pow(std::max(c.mean_sqrt - c.clip_b, 0.0), 2);
    CHECK(lambda_bar(m, ref, c, 1e6, dist) == doctest::Approx(floor_value));
    double y_mid = 0.0;
    double best = 1e300;
    for (double y = -30.0; y <= 30.0; y += 0.01) {
      const double d = std::abs(std::sqrt(lambda_tilde(m, ref, y, dist)) - c.mean_sqrt);
      if (d < best) best = d, y_mid = y;
    }
    REQUIRE(best < c.clip_b);
    const double lt = lambda_tilde(m, ref, y_mid, dist);
    CHECK(lambda_bar(m, ref, c, y_mid, dist) == doctest::Approx(c.consistency * lt).epsilon(1e-12));
  }

  TEST_CASE("robust gammas are finite everywhere and plateau in the tails") {
    const RegimeModel m = demo_model();
    const ReferenceMeasure ref(10.0);
    const auto c = calibrate_clipping(m, ref, stationary_distribution(m), 0.95, 20000, 5);
    for (double y : {-1e8, -50.0, 0.0, 50.0, 1e8}) {
      const auto g = robust_gammas(m, ref, c, y);
      for (double v : g) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
      }
    }
    const auto far = robust_gammas(m, ref, c, 1e8);
    const auto farther = robust_gammas(m, ref, c, 2e8);
    CHECK(far[0] == farther[0]);
    CHECK(far[1] == farther[1]);
  }
}
