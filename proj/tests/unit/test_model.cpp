#include <doctest.h>

#include <cmath>

#include "rhmm/error.hpp"
#include "rhmm/model.hpp"

using namespace rhmm;

TEST_SUITE("model") {
  TEST_CASE("regime model validates its parameters") {
    CHECK_NOTHROW(RegimeModel(Matrix::from_rows({{0.9, 0.2}, {0.1, 0.8}}), {0.0, 1.0}, {1.0, 2.0}));
    CHECK_THROWS_AS(RegimeModel(Matrix::from_rows({{0.9, 0.2}, {0.2, 0.8}}), {0.0, 1.0}, {1.0, 2.0}),
                    InvalidArgument);
    CHECK_THROWS_AS(RegimeModel(Matrix::from_rows({{1.1, 0.2}, {-0.1, 0.8}}), {0.0, 1.0}, {1.0, 2.0}),
                    InvalidArgument);
    CHECK_THROWS_AS(RegimeModel(Matrix::identity(2), {0.0, 1.0}, {1.0, 0.0}), InvalidArgument);
    CHECK_THROWS_AS(RegimeModel(Matrix::identity(2), {0.0}, {1.0, 1.0}), InvalidArgument);
  }

  TEST_CASE("transition is indexed (to, from)") {
    const RegimeModel m(Matrix::from_rows({{0.9, 0.2}, {0.1, 0.8}}), {0.0, 1.0}, {1.0, 2.0});
    CHECK(m.transition(1, 0) == doctest::Approx(0.1));
    CHECK(m.transition(0, 1) == doctest::Approx(0.2));
  }

  TEST_CASE("state distributions") {
    CHECK_THROWS_AS(StateDistribution({0.5, 0.6}), InvalidArgument);
    CHECK_THROWS_AS(StateDistribution({1.5, -0.5}), InvalidArgument);
    const auto d = StateDistribution::normalized(std::vector<double>{1.0, 3.0});
    CHECK(d[1] == doctest::Approx(0.75));
    CHECK(StateDistribution::uniform(4)[2] == doctest::Approx(0.25));
    CHECK(StateDistribution::point_mass(3, 1)[1] == 1.0);
  }

  TEST_CASE("returns from prices") {
    CHECK(returns_from_prices(std::vector<double>{100, 100})[0] == 0.0);
    const auto r = returns_from_prices(std::vector<double>{100, 110, 99});
    REQUIRE(r.size() == 2);
    CHECK(r[0] == doctest::Approx(std::log(1.1)).epsilon(1e-14));
    CHECK(r[1] == doctest::Approx(std::log(0.9)).epsilon(1e-14));
    CHECK_THROWS_AS(returns_from_prices(std::vector<double>{100, 0}), InvalidArgument);
  }

  TEST_CASE("return series rejects non-finite values and keeps timestamps") {
    CHECK_THROWS_AS(ReturnSeries(std::vector<double>{1.0, NAN}), InvalidArgument);
    const ReturnSeries s({1.0, 2.0, 3.0}, {"a", "b", "c"});
    const ReturnSeries p = s.prefix(2);
    CHECK(p.size() == 2);
    CHECK(p.timestamps().back() == "b");
  }

  TEST_CASE("stationary distribution") {
    const RegimeModel m(Matrix::from_rows({{0.9, 0.2}, {0.1, 0.8}}), {0.0, 0.0}, {1.0, 1.0});
    const auto st = stationary_distribution(m);
    CHECK(st[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(st[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    const RegimeModel id(Matrix::identity(2), {0.0, 0.0}, {1.0, 1.0});
    CHECK(stationary_distribution(id)[0] == doctest::Approx(0.5));
    const RegimeModel one(Matrix::identity(1), {0.0}, {1.0});
    CHECK(stationary_distribution(one)[0] == 1.0);
  }

  TEST_CASE("periodic chain is reported") {
    const RegimeModel flip(Matrix::from_rows({{0.0, 1.0}, {1.0, 0.0}}), {0.0, 0.0}, {1.0, 1.0});
    // The uniform start is already stationary for the flip chain.
    CHECK(stationary_distribution(flip)[0] == doctest::Approx(0.5));
    const RegimeModel cyc(Matrix::from_rows({{0, 0, 1}, {1, 0, 0}, {0, 1, 0}}), {0, 0, 0}, {1, 1, 1});
    CHECK(stationary_distribution(cyc)[2] == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("marginal moments of a two-state mixture") {
    const RegimeModel m(Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}}), {-1.0, 1.0}, {1.0, 1.0});
    const auto mm = marginal_moments(m, StateDistribution::uniform(2));
    CHECK(mm.mean == doctest::Approx(0.0));
    CHECK(mm.sd == doctest::Approx(std::sqrt(2.0)));
  }
}
