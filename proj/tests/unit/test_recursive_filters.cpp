#include <doctest.h>

#include <cmath>
#include <random>

#include "../support/instances.hpp"
#include "rhmm/error.hpp"
#include "rhmm/recursive_filters.hpp"

using namespace rhmm;
using rhmm::testing::classical_gammas;

TEST_SUITE("recursive_filters") {
  TEST_CASE("initial bank") {
    const FilterBank b = init_filters(StateDistribution({1.0, 0.0}));
    CHECK(b.eta_x == std::vector<double>{1.0, 0.0});
    for (double v : b.eta_j) CHECK(v == 0.0);
    for (double v : b.eta_o) CHECK(v == 0.0);
    const auto e = normalize(init_filters(StateDistribution::uniform(3)));
    for (double v : e.state) CHECK(v == doctest::Approx(1.0 / 3.0));
    CHECK(init_filters(StateDistribution::uniform(3)).mass() == doctest::Approx(1.0));
  }

  TEST_CASE("single state counts time") {
    const RegimeModel m(Matrix::identity(1), {0.3}, {1.5});
    FilterBank b = init_filters(StateDistribution::uniform(1));
    const std::vector<double> ys{0.1, -2.0, 0.4};
    for (double y : ys) b = rescale(step(b, m, classical_gammas(m)(y), y));
    const auto e = normalize(b);
    CHECK(e.occupation[0] == doctest::Approx(3.0));
    CHECK(e.jumps(0, 0) == doctest::Approx(3.0));
    CHECK(e.aux1[0] == doctest::Approx(0.1 - 2.0 + 0.4));
    CHECK(e.aux2[0] == doctest::Approx(0.01 + 4.0 + 0.16));
  }

  TEST_CASE("absorbing chain keeps its state") {
    const RegimeModel m(Matrix::identity(2), {0.0, 3.0}, {1.0, 1.0});
    FilterBank b = init_filters(StateDistribution::point_mass(2, 0));
    for (double y : {3.0, 3.1, 2.9, 8.0}) b = rescale(step(b, m, classical_gammas(m)(y), y));
    const auto e = normalize(b);
    CHECK(e.state[0] == 1.0);
    CHECK(e.state[1] == 0.0);
  }

  TEST_CASE("recursion matches path enumeration") {
    std::mt19937_64 rng(17);
    for (int inst = 0; inst < 60; ++inst) {
      const auto in = rhmm::testing::random_instance(1 + inst % 3, 3 + inst % 5, rng);
      const auto rec = rhmm::testing::run_filters(in);
      const auto ora = brute_force_oracle(in.model, in.x0, in.ys, classical_gammas(in.model));
      const std::size_t n = in.model.n_states();
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(rhmm::testing::rel_err(rec.state[i], ora.state[i], 1e-300) < 1e-9);
        CHECK(rhmm::testing::rel_err(rec.occupation[i], ora.occupation[i], 1e-300) < 1e-9);
        CHECK(rhmm::testing::rel_err(rec.aux1[i], ora.aux1[i], 1e-12) < 1e-9);
        CHECK(rhmm::testing::rel_err(rec.aux2[i], ora.aux2[i], 1e-300) < 1e-9);
        for (std::size_t j = 0; j < n; ++j) {
          CHECK(rhmm::testing::rel_err(rec.jumps(j, i), ora.jumps(j, i), 1e-300) < 1e-9);
        }
      }
    }
  }

  TEST_CASE("occupation partitions time and jumps sum to occupation") {
    std::mt19937_64 rng(3);
    const auto in = rhmm::testing::random_instance(3, 7, rng);
    const auto e = rhmm::testing::run_filters(in);
    double total = 0.0;
    for (std::size_t r = 0; r < 3; ++r) {
      total += e.occupation[r];
      double out = 0.0;
      for (std::size_t s = 0; s < 3; ++s) out += e.jumps(s, r);
      CHECK(out == doctest::Approx(e.occupation[r]).epsilon(1e-8));
    }
    CHECK(total == doctest::Approx(7.0).epsilon(1e-8));
  }

  TEST_CASE("rescale is idempotent and quotient invariant") {
    std::mt19937_64 rng(5);
    const auto in = rhmm::testing::random_instance(2, 4, rng);
    FilterBank b = init_filters(in.x0);
    for (double y : in.ys) b = step(b, in.model, classical_gammas(in.model)(y), y);
    const FilterBank r1 = rescale(b);
    const FilterBank r2 = rescale(r1);
    CHECK(r1.mass() == doctest::Approx(1.0).epsilon(1e-15));
    for (std::size_t k = 0; k < r1.eta_t2.size(); ++k) CHECK(r1.eta_t2[k] == doctest::Approx(r2.eta_t2[k]).epsilon(1e-15));
    const auto e0 = normalize(b), e1 = normalize(r1);
    for (std::size_t i = 0; i < 2; ++i) CHECK(e0.aux1[i] == doctest::Approx(e1.aux1[i]).epsilon(1e-12));
  }

  TEST_CASE("non-finite gammas are a breakdown at the new step") {
    const RegimeModel m(Matrix::identity(1), {0.0}, {1.0});
    FilterBank b = init_filters(StateDistribution::uniform(1));
    b = step(b, m, std::vector<double>{1.0}, 0.0);
    try {
      (void)step(b, m, std::vector<double>{INFINITY}, 0.0);
      FAIL("expected a breakdown");
    } catch (const BreakdownError& e) {
      CHECK(e.step() == 2);
    }
    CHECK_THROWS_AS(step(b, m, std::vector<double>{0.0}, 0.0), BreakdownError);
    CHECK_THROWS_AS(step(b, m, std::vector<double>{1.0, 1.0}, 0.0), InvalidArgument);
  }

  TEST_CASE("oracle guards its path count") {
    const RegimeModel m(Matrix::from_rows({{0.5, 0.5, 0.0}, {0.5, 0.0, 0.5}, {0.0, 0.5, 0.5}}), {0, 0, 0}, {1, 1, 1});
    std::vector<double> ys(14, 0.0);
    CHECK_THROWS_AS(brute_force_oracle(m, StateDistribution::uniform(3), ys, classical_gammas(m)),
                    InvalidArgument);
  }
}
