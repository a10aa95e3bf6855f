#include <doctest.h>

#include <cmath>
#include <limits>

#include "rhmm/error.hpp"
#include "rhmm/so_optimal.hpp"

using namespace rhmm;

TEST_SUITE("so_optimal") {
  TEST_CASE("normal ideal law moments") {
    const IdealLaw law = IdealLaw::normal(1.0, 2.0);
    CHECK(law.mean() == 1.0);
    CHECK(law.variance() == doctest::Approx(4.0));
    CHECK(law.backend() == "quadrature");
    // E(|D|/rho - 1)_+ for rho -> 0+ grows without bound; at large rho it vanishes
    CHECK(law.positive_part(100.0) < 1e-12);
    CHECK(law.clipped_second_moment(1e3) == doctest::Approx(4.0).epsilon(1e-10));
  }

  TEST_CASE("rho solves the mass condition") {
    const IdealLaw law = IdealLaw::normal(0.0, 1.0);
    for (double r : {0.01, 0.1, 0.3, 0.5}) {
      const double rho = solve_rho(law, r);
      CHECK(std::abs(mass_residual(law, r, rho)) < 1e-8);
    }
    CHECK(solve_rho(law, 0.01) > solve_rho(law, 0.1));
    CHECK(solve_rho(law, 0.1) > solve_rho(law, 0.5));
    // r = 0.5: E(|Z|/rho - 1)_+ = 1, closed form 2 (phi(rho) - rho (1 - Phi(rho))) / rho = 1
    const double rho = solve_rho(law, 0.5);
    const double phi = std::exp(-0.5 * rho * rho) / std::sqrt(2.0 * M_PI);
    const double tail = 0.5 * std::erfc(rho / std::sqrt(2.0));
    CHECK(2.0 * (phi - rho * tail) / rho == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(rho == doctest::Approx(0.4363265638).epsilon(1e-9));
    CHECK_THROWS_AS(solve_rho(law, 0.0), InvalidArgument);
    CHECK_THROWS_AS(solve_rho(law, 1.0), InvalidArgument);
  }

  TEST_CASE("Monte-Carlo backend agrees with quadrature") {
    const IdealLaw q = IdealLaw::normal(0.0, 1.0);
    const IdealLaw mc = IdealLaw::from_sampler(q.sampler(), 400000, 3);
    CHECK(mc.backend() == "monte-carlo");
    CHECK(solve_rho(mc, 0.1) == doctest::Approx(solve_rho(q, 0.1)).epsilon(0.01));
  }

  TEST_CASE("reconstruction") {
    const SoProblem p = make_problem(IdealLaw::normal(2.0, 1.0), 0.1);
    CHECK(reconstruct(p, 2.0) == 2.0);
    for (double y = -100.0; y <= 100.0; y += 1.7) CHECK(std::abs(reconstruct(p, y) - 2.0) <= p.rho * (1 + 1e-15));
    const SoProblem wide{IdealLaw::normal(0.0, 1.0), 0.1, std::numeric_limits<double>::infinity()};
    CHECK(reconstruct(wide, 123.0) == 123.0);
    const auto v = reconstruct({0.0, 0.0}, 1.0, {3.0, 4.0});
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[1] == doctest::Approx(0.8));
  }

  TEST_CASE("saddle risk") {
    const SoProblem p = make_problem(IdealLaw::normal(0.0, 1.0), 0.1);
    CHECK(saddle_risk(p) <= 1.0);
    CHECK(saddle_risk(p) >= 0.0);
    CHECK(saddle_risk_without_contamination_term(p) > saddle_risk(p));
    const SoProblem tiny = make_problem(IdealLaw::normal(0.0, 1.0), 0.001);
    CHECK(saddle_risk(tiny) < 0.05);
  }

  TEST_CASE("saddle point check on a reduced battery") {
    const SoProblem p = make_problem(IdealLaw::normal(0.0, 1.0), 0.1);
    const SaddleReport r = verify_saddle_point(p, default_contaminators(p), 200000, 4);
    CHECK(r.risk_matches);
    for (const auto& c : r.contaminators) {
      INFO(c.name);
      CHECK(c.within);
      if (c.name == "point_inside") CHECK(c.risk.mean < r.risk_p0.mean);
    }
    for (const auto& c : r.reconstructions) {
      INFO(c.name);
      CHECK(c.worse);
    }
  }
}
