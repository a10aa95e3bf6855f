#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "rhmm/em_engine.hpp"
#include "rhmm/error.hpp"
#include "rhmm/measure_change.hpp"
#include "rhmm/simulator.hpp"
#include "support/instances.hpp"

using namespace rhmm;
using rhmm::testing::classical_gammas;
using rhmm::testing::random_instance;

namespace {

RegimeModel separated_model() {
  return RegimeModel(Matrix::from_rows({{0.9, 0.05}, {0.1, 0.95}}), {-3.0, 2.0}, {2.0, 1.0});
}

struct SingleBatch {
  FilterBank bank;
  MembershipTracker tracker;
};

SingleBatch one_batch(const rhmm::testing::OracleInstance& inst) {
  const GammaFn g = classical_gammas(inst.model);
  SingleBatch sb{init_filters(inst.x0), MembershipTracker(inst.model.n_states())};
  for (double y : inst.ys) {
    const std::vector<double> gam = g(y);
    sb.tracker.advance(inst.model, gam, sb.bank.eta_x);
    sb.bank = step(sb.bank, inst.model, gam, y);
    const double z = sb.bank.mass();
    sb.bank = rescale(sb.bank);
    sb.tracker.scale(1.0 / z);
  }
  return sb;
}

}  // namespace

TEST_SUITE("em_engine") {
  TEST_CASE("config validation and defaults") {
    BatchConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.first_batch_len() == 30);
    CHECK(c.resolved_estimator() == Estimator::mle);
    c.mode = Mode::robust;
    CHECK(c.resolved_estimator() == Estimator::mbre);
    CHECK(c.resolved_init() == InitMethod::robust);
    CHECK(c.resolved_reference() == ReferenceChoice::mad);
    c.batch_len = 0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    CHECK(parse_mode("robust") == Mode::robust);
    CHECK_THROWS_AS(parse_mode("other"), InvalidArgument);
  }

  TEST_CASE("one state gives the sample mean and the population sd") {
    std::mt19937_64 g(3);
    std::normal_distribution<double> z(0.5, 2.0);
    std::vector<double> y(95);
    for (double& v : y) v = z(g);
    BatchConfig c;
    const EstimationTrace tr = run(y, 1, c);
    REQUIRE_FALSE(tr.broke_down());
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / 95.0;
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const RegimeModel m = tr.final_model();
    CHECK(m.drift()[0] == doctest::Approx(mean).epsilon(1e-10));
    CHECK(m.vol()[0] == doctest::Approx(std::sqrt(ss / 95.0)).epsilon(1e-10));
    CHECK(tr.batches.size() == 8);
    CHECK(tr.batches.back().first == 91);
    CHECK(tr.batches.back().last == 95);
  }

  TEST_CASE("weighted sums match the filter quotients") {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 40; ++rep) {
      const auto inst = random_instance(1 + rep % 3, 3 + rep % 6, rng);
      const SingleBatch sb = one_batch(inst);
      const FilterEstimates est = normalize(sb.bank);
      const ModelUpdate q = m_step_classical(est, inst.model, 0.0);
      const WeightTriangle tri = build_weight_triangle(sb.tracker, sb.bank);
      const WeightedSums w = m1_weighted_sums(tri, inst.ys);
      for (std::size_t i = 0; i < inst.model.n_states(); ++i) {
        CHECK(std::abs(w.drift[i] - q.drift[i]) <= 1e-8 * std::max(1.0, std::abs(q.drift[i])));
        CHECK(std::abs(w.vol[i] - q.vol[i]) <= 1e-8 * std::max(1.0, q.vol[i]));
        CHECK(tri.gain[i] == doctest::Approx(1.0));
      }
    }
  }

  TEST_CASE("smoothed memberships match path enumeration") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 10; ++rep) {
      const auto inst = random_instance(2 + rep % 2, 5, rng);
      const std::size_t n = inst.model.n_states();
      const std::size_t k = inst.ys.size();
      const SingleBatch sb = one_batch(inst);
      const Matrix memb = build_weight_triangle(sb.tracker, sb.bank).state_memberships();
      const GammaFn g = classical_gammas(inst.model);
      Matrix exact(k, n);
      double total = 0.0;
      std::vector<std::size_t> path(k);
      std::size_t count = 1;
      for (std::size_t l = 0; l < k; ++l) count *= n;
      for (std::size_t code = 0; code < count; ++code) {
        std::size_t c = code;
        for (std::size_t l = 0; l < k; ++l, c /= n) path[l] = c % n;
        // path[l] is the state that generated y_{l+1}
        double w = inst.x0[path[0]];
        for (std::size_t l = 0; l < k; ++l) {
          w *= g(inst.ys[l])[path[l]];
          if (l + 1 < k) w *= inst.model.transition(path[l + 1], path[l]);
        }
        total += w;
        for (std::size_t l = 0; l < k; ++l) exact(l, path[l]) += w;
      }
      for (std::size_t l = 0; l < k; ++l) {
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(memb(l, i) == doctest::Approx(exact(l, i) / total).epsilon(1e-9));
        }
      }
    }
  }

  TEST_CASE("robust mode without clipping reproduces the classical run") {
    const RegimeModel m = separated_model();
    const auto path = simulate_hmm(m, stationary_distribution(m), 400, 12);
    BatchConfig cls;
    BatchConfig rob;
    rob.mode = Mode::robust;
    rob.alpha = 1.0;
    rob.estimator = Estimator::mle;
    rob.init = InitMethod::classical;
    rob.reference = ReferenceChoice::standard;
    const auto a = run(path.observed.values(), 2, cls);
    const auto b = run(path.observed.values(), 2, rob);
    REQUIRE(a.batches.size() == b.batches.size());
    for (std::size_t k = 0; k < a.batches.size(); ++k) {
      for (std::size_t i = 0; i < 2; ++i) {
        CHECK(b.batches[k].drift[i] == doctest::Approx(a.batches[k].drift[i]).epsilon(1e-6));
        CHECK(b.batches[k].vol[i] == doctest::Approx(a.batches[k].vol[i]).epsilon(1e-6));
      }
    }
  }

  TEST_CASE("early batches do not depend on later data") {
    const RegimeModel m = demo_model();
    const auto path = simulate_hmm(m, stationary_distribution(m), 200, 8);
    for (Mode mode : {Mode::classical, Mode::robust}) {
      BatchConfig c;
      c.mode = mode;
      const auto full = run(path.observed.values(), 2, c);
      const auto part = run(path.observed.values().first(100), 2, c);
      REQUIRE(part.batches.size() == 8);
      for (std::size_t k = 0; k < part.batches.size(); ++k) {
        CHECK(part.batches[k].drift == full.batches[k].drift);
        CHECK(part.batches[k].vol == full.batches[k].vol);
        CHECK(part.batches[k].transition == full.batches[k].transition);
      }
    }
  }

  TEST_CASE("robust one-step update is bounded") {
    std::mt19937_64 rng(31);
    const auto inst = random_instance(2, 6, rng);
    const SingleBatch sb = one_batch(inst);
    const WeightTriangle tri = build_weight_triangle(sb.tracker, sb.bank);
    const std::vector<double> f0{-0.2, 0.3};
    const std::vector<double> s0{0.8, 1.1};
    const std::vector<bool> frozen(2, false);
    RobustM1Options opt;
    auto ys = inst.ys;
    const WeightedSums base = m1_robust(tri, ys, f0, s0, frozen, opt);
    ys[2] = 1e6;
    const WeightedSums big = m1_robust(tri, ys, f0, s0, frozen, opt);
    ys[2] = 1e12;
    const WeightedSums huge = m1_robust(tri, ys, f0, s0, frozen, opt);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::abs(big.drift[i] - f0[i]) <= s0[i] * opt.consts.b * tri.gain[i] + 1e-12);
      CHECK(std::abs(std::log(big.vol[i] / s0[i])) <= opt.consts.b * tri.gain[i] + 1e-12);
      CHECK(std::abs(huge.drift[i] - big.drift[i]) < 1e-5);
      CHECK(std::abs(huge.vol[i] - big.vol[i]) < 1e-5);
      CHECK(std::isfinite(base.drift[i]));
    }
  }

  TEST_CASE("unvisited states keep their parameters") {
    const RegimeModel start(
        Matrix::from_rows({{0.9, 0.2, 0.3}, {0.1, 0.8, 0.3}, {0.0, 0.0, 0.4}}), {-1.0, 1.0, 7.0},
        {1.0, 1.0, 0.5});
    const StateDistribution x0({0.5, 0.5, 0.0});
    std::mt19937_64 g(2);
    std::normal_distribution<double> z;
    std::vector<double> y(60);
    for (double& v : y) v = z(g);
    BatchConfig c;
    const auto tr = run(y, start, x0, c);
    REQUIRE_FALSE(tr.broke_down());
    CHECK(tr.init->method == "given");
    for (const BatchRecord& b : tr.batches) {
      CHECK(b.frozen[2]);
      CHECK_FALSE(b.frozen[0]);
      CHECK(b.drift[2] == 7.0);
      CHECK(b.vol[2] == 0.5);
      CHECK(b.transition(2, 2) == doctest::Approx(0.4));
    }
  }

  TEST_CASE("outlier threshold and flag rate under the model") {
    const double thr = outlier_threshold(0.01, 100000, 4);
    // |(Z, Z^2 - 1)| is dominated by Z^2 - 1 in the tail: 2.576^2 - 1 = 5.63
    CHECK(thr > 5.6);
    CHECK(thr < 6.8);
    std::size_t flagged = 0;
    std::size_t total = 0;
    for (int r = 0; r < 20; ++r) {
      std::mt19937_64 g(r);
      std::normal_distribution<double> z;
      std::vector<double> y(500);
      for (double& v : y) v = z(g);
      BatchConfig c;
      c.seed = r + 1;
      for (const StepRecord& s : run(y, 1, c).steps) {
        ++total;
        flagged += s.flagged;
      }
    }
    const double rate = static_cast<double>(flagged) / static_cast<double>(total);
    CHECK(rate > 0.004);
    CHECK(rate < 0.02);
  }

  TEST_CASE("planted outliers are flagged") {
    const RegimeModel demo = demo_model();
    const auto st = stationary_distribution(demo);
    for (int r = 0; r < 5; ++r) {
      const auto clean = simulate_hmm(demo, st, demo_horizon, 100 + r);
      const auto dirty = contaminate(clean, preset_contamination("severe", demo), 1);
      BatchConfig c;
      c.mode = Mode::robust;
      c.seed = r + 1;
      const auto tr = run(dirty.observed.values(), 2, c);
      REQUIRE_FALSE(tr.broke_down());
      for (std::size_t k : planted_positions()) CHECK(tr.steps[k - 1].flagged);
    }
  }

  TEST_CASE("few false flags on clean data") {
    const RegimeModel m = separated_model();
    const auto st = stationary_distribution(m);
    std::size_t flagged = 0;
    std::size_t total = 0;
    for (int r = 0; r < 10; ++r) {
      const auto p = simulate_hmm(m, st, 2000, 500 + r);
      BatchConfig c;
      c.mode = Mode::robust;
      c.seed = r + 1;
      c.init_len = 200;
      for (const StepRecord& s : run(p.observed.values(), 2, c).steps) {
        ++total;
        flagged += s.flagged;
      }
    }
    CHECK(static_cast<double>(flagged) / static_cast<double>(total) <= 0.03);
  }

  TEST_CASE("classical run breaks down on a huge observation") {
    const RegimeModel demo = demo_model();
    const auto clean = simulate_hmm(demo, stationary_distribution(demo), demo_horizon, 1);
    const auto dirty = contaminate(clean, preset_contamination("severe", demo), 1);
    BatchConfig c;
    const auto tr = run(dirty.observed.values(), 2, c);
    REQUIRE(tr.broke_down());
    CHECK(tr.breakdown->step == 40);
    CHECK(tr.steps.size() == 39);
  }

  TEST_CASE("a run from the true values stays close") {
    const RegimeModel m = separated_model();
    const auto st = stationary_distribution(m);
    const auto p = simulate_hmm(m, st, 2000, 41);
    BatchConfig c;
    const auto tr = run(p.observed.values(), m, st, c);
    const RegimeModel est = tr.final_model();
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::abs(est.drift()[i] - m.drift()[i]) < 0.3);
      CHECK(std::abs(est.vol()[i] - m.vol()[i]) < 0.2);
      for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(est.transition(j, i) - m.transition(j, i)) < 0.05);
    }
  }

  TEST_CASE("clipping constants can be held after the first batch") {
    const RegimeModel demo = demo_model();
    const auto path = simulate_hmm(demo, stationary_distribution(demo), 120, 6);
    BatchConfig c;
    c.mode = Mode::robust;
    c.recalibrate = false;
    const auto tr = run(path.observed.values(), 2, c);
    REQUIRE(tr.batches.size() > 2);
    for (const BatchRecord& b : tr.batches) {
      REQUIRE(b.calibration.has_value());
      CHECK(b.calibration->clip_b == tr.batches[0].calibration->clip_b);
      CHECK(b.calibration->consistency == tr.batches[0].calibration->consistency);
    }
  }

  TEST_CASE("series checks") {
    BatchConfig c;
    CHECK_THROWS_AS(run(std::vector<double>{}, 2, c), InvalidArgument);
    CHECK_THROWS_AS(run(std::vector<double>{1.0, NAN, 2.0}, 1, c), InvalidArgument);
  }
}
