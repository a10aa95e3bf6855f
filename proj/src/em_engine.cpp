#include "rhmm/em_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "rhmm/error.hpp"
#include "rhmm/rng.hpp"

namespace rhmm {

namespace {

std::vector<double> normalized_state(const FilterBank& bank) {
  const double z = bank.mass();
  std::vector<double> p(bank.eta_x.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = bank.eta_x[i] / z;
  return p;
}

}  // namespace

std::string to_string(Mode m) { return m == Mode::classical ? "classical" : "robust"; }

std::string to_string(InitMethod m) {
  switch (m) {
    case InitMethod::automatic: return "auto";
    case InitMethod::classical: return "classical";
    case InitMethod::robust: return "robust";
  }
  return "auto";
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::automatic: return "auto";
    case Estimator::mle: return "mle";
    case Estimator::mbre: return "mbre";
  }
  return "auto";
}

std::string to_string(ReferenceChoice r) {
  switch (r) {
    case ReferenceChoice::automatic: return "auto";
    case ReferenceChoice::standard: return "standard";
    case ReferenceChoice::sd: return "sd";
    case ReferenceChoice::mad: return "mad";
  }
  return "auto";
}

Mode parse_mode(const std::string& s) {
  if (s == "classical") return Mode::classical;
  if (s == "robust") return Mode::robust;
  throw InvalidArgument("mode must be classical or robust, got '" + s + "'");
}

void BatchConfig::validate() const {
  if (batch_len < 2) throw InvalidArgument("batch length must be at least 2");
  if (init_len == 1) throw InvalidArgument("initialization window must hold at least 2 observations");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
  if (!(mad_floor > 0.0)) throw InvalidArgument("mad_floor must be positive");
  if (mc_size < 10000) throw InvalidArgument("mc_size must be at least 1e4");
  if (consistency_reps < 1000) throw InvalidArgument("consistency_reps must be at least 1000");
  if (!(outlier_q > 0.0 && outlier_q < 1.0)) throw InvalidArgument("outlier_q must lie in (0, 1)");
  if (!(freeze_eps > 0.0)) throw InvalidArgument("freeze_eps must be positive");
}

InitMethod BatchConfig::resolved_init() const {
  if (init != InitMethod::automatic) return init;
  return mode == Mode::classical ? InitMethod::classical : InitMethod::robust;
}

Estimator BatchConfig::resolved_estimator() const {
  if (estimator != Estimator::automatic) return estimator;
  return mode == Mode::classical ? Estimator::mle : Estimator::mbre;
}

ReferenceChoice BatchConfig::resolved_reference() const {
  if (reference != ReferenceChoice::automatic) return reference;
  return mode == Mode::classical ? ReferenceChoice::standard : ReferenceChoice::mad;
}

void MembershipTracker::advance(const RegimeModel& model, std::span<const double> gammas,
                                std::span<const double> eta_x_before) {
  const std::size_t n = n_;
  if (model.n_states() != n || gammas.size() != n || eta_x_before.size() != n) {
    throw InvalidArgument("MembershipTracker::advance: size mismatch");
  }
  for (auto& row : rows_) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> block(row.data() + i * n, n);
      const std::vector<double> next = propagate(model, gammas, block);
      std::copy(next.begin(), next.end(), row.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
  }
  std::vector<double> row(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gammas[i] * eta_x_before[i];
    for (std::size_t j = 0; j < n; ++j) row[i * n + j] = g * model.transition(j, i);
  }
  rows_.push_back(std::move(row));
}

void MembershipTracker::scale(double factor) {
  for (auto& row : rows_) {
    for (double& v : row) v *= factor;
  }
}

double MembershipTracker::mass(std::size_t l, std::size_t i) const {
  const auto& row = rows_.at(l);
  double s = 0.0;
  for (std::size_t j = 0; j < n_; ++j) s += row[i * n_ + j];
  return s;
}

std::vector<double> WeightTriangle::noether() const {
  std::vector<double> out(n_states(), 0.0);
  for (std::size_t i = 0; i < n_states(); ++i) {
    double mx = 0.0, ss = 0.0;
    for (std::size_t l = 0; l < size(); ++l) {
      const double q = w(l, i) * w(l, i);
      mx = std::max(mx, q);
      ss += q;
    }
    out[i] = ss > 0.0 ? mx / ss : 0.0;
  }
  return out;
}

Matrix WeightTriangle::state_memberships() const {
  Matrix p(size(), n_states());
  for (std::size_t l = 0; l < size(); ++l) {
    double total = 0.0;
    for (std::size_t i = 0; i < n_states(); ++i) total += masses(l, i);
    for (std::size_t i = 0; i < n_states(); ++i) {
      p(l, i) = total > 0.0 ? masses(l, i) / total : 1.0 / static_cast<double>(n_states());
    }
  }
  return p;
}

WeightTriangle build_weight_triangle(const MembershipTracker& tracker, const FilterBank& bank) {
  const std::size_t n = bank.n;
  if (tracker.n_states() != n) throw InvalidArgument("build_weight_triangle: size mismatch");
  const std::size_t k = tracker.size();
  const double z = bank.mass();
  WeightTriangle tri;
  tri.w = Matrix(k, n);
  tri.masses = Matrix(k, n);
  tri.gain.assign(n, 0.0);
  tri.occupation.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto occ = bank.occupation(i);
    const double o = std::accumulate(occ.begin(), occ.end(), 0.0);
    tri.occupation[i] = o / z;
    for (std::size_t l = 0; l < k; ++l) {
      const double m = tracker.mass(l, i);
      tri.masses(l, i) = m;
      tri.w(l, i) = o > 0.0 ? m / o : 0.0;
      tri.gain[i] += tri.w(l, i);
    }
  }
  return tri;
}

Matrix m2_pi(const FilterEstimates& est, const RegimeModel& prev, double eps) {
  const std::size_t n = prev.n_states();
  Matrix pi(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    const double o = est.occupation[r];
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) total += std::max(est.jumps(s, r), 0.0);
    if (o <= eps || !(total > 0.0)) {
      for (std::size_t s = 0; s < n; ++s) pi(s, r) = prev.transition(s, r);
      continue;
    }
    for (std::size_t s = 0; s < n; ++s) pi(s, r) = std::max(est.jumps(s, r), 0.0) / o;
    double col = 0.0;
    for (std::size_t s = 0; s < n; ++s) col += pi(s, r);
    for (std::size_t s = 0; s < n; ++s) pi(s, r) /= col;
  }
  return pi;
}

ModelUpdate m_step_classical(const FilterEstimates& est, const RegimeModel& prev, double eps) {
  const std::size_t n = prev.n_states();
  ModelUpdate u;
  u.drift.assign(prev.drift().begin(), prev.drift().end());
  u.vol.assign(prev.vol().begin(), prev.vol().end());
  u.frozen.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const double o = est.occupation[i];
    if (o <= eps) {
      u.frozen[i] = true;
      continue;
    }
    const double f = est.aux1[i] / o;
    const double rad = (est.aux2[i] - 2.0 * f * est.aux1[i] + f * f * o) / o;
    const double tol = 1e-12 * std::max(1.0, est.aux2[i] / o);
    if (rad < -tol) {
      throw Error("m_step_classical: negative variance for state " + std::to_string(i + 1));
    }
    const double s = std::sqrt(std::max(rad, 0.0));
    u.drift[i] = f;
    if (s > 0.0) u.vol[i] = s;
  }
  u.transition = m2_pi(est, prev, eps);
  return u;
}

WeightedSums m1_weighted_sums(const WeightTriangle& tri, std::span<const double> ys) {
  if (ys.size() != tri.size()) throw InvalidArgument("m1_weighted_sums: size mismatch");
  const std::size_t n = tri.n_states();
  WeightedSums out{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    double f = 0.0;
    for (std::size_t l = 0; l < ys.size(); ++l) f += tri.w(l, i) * ys[l];
    double v = 0.0;
    for (std::size_t l = 0; l < ys.size(); ++l) v += tri.w(l, i) * (ys[l] - f) * (ys[l] - f);
    out.drift[i] = f;
    out.vol[i] = std::sqrt(v);
  }
  return out;
}

WeightedSums m1_robust(const WeightTriangle& tri, std::span<const double> ys,
                       std::span<const double> prev_drift, std::span<const double> prev_vol,
                       const std::vector<bool>& frozen, const RobustM1Options& opt) {
  const std::size_t n = tri.n_states();
  if (ys.size() != tri.size() || prev_drift.size() != n || prev_vol.size() != n ||
      frozen.size() != n) {
    throw InvalidArgument("m1_robust: size mismatch");
  }
  WeightedSums out{std::vector<double>(prev_drift.begin(), prev_drift.end()),
                   std::vector<double>(prev_vol.begin(), prev_vol.end())};
  std::vector<double> col(ys.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (frozen[i]) continue;
    double total = 0.0;
    for (std::size_t l = 0; l < ys.size(); ++l) total += (col[l] = tri.w(l, i));
    if (!(total > 0.0)) continue;
    if (opt.first_batch) {
      const WeightedSample sample(std::vector<double>(ys.begin(), ys.end()), col);
      const double f = weighted_median(sample);
      const double c = mc_consistency_factor(col, opt.consistency_reps, derive_seed(opt.seed, i));
      out.drift[i] = f;
      out.vol[i] = std::max(weighted_mad(sample, f, c), opt.sigma_floor);
      continue;
    }
    const double f0 = prev_drift[i];
    const double s0 = prev_vol[i];
    double loc = 0.0, scale = 0.0;
    for (std::size_t l = 0; l < ys.size(); ++l) {
      const MbrePsi psi = mbre_if((ys[l] - f0) / s0, opt.consts);
      loc += col[l] * psi.loc;
      scale += col[l] * psi.scale;
    }
    out.drift[i] = f0 + s0 * loc;
    out.vol[i] = std::max(s0 * std::exp(scale), opt.sigma_floor);
  }
  return out;
}

double outlier_threshold(double q, std::size_t mc_size, std::uint64_t seed) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("outlier_threshold: q must lie in (0, 1)");
  if (mc_size == 0) throw InvalidArgument("outlier_threshold: mc_size must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> s(mc_size);
  for (double& v : s) {
    const double z = normal(rng);
    v = std::hypot(z, z * z - 1.0);
  }
  const auto rank = static_cast<std::size_t>(std::ceil((1.0 - q) * static_cast<double>(mc_size)));
  const std::size_t idx = std::min(mc_size - 1, rank == 0 ? 0 : rank - 1);
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(idx), s.end());
  return s[idx];
}

std::vector<OutlierScore> flag_outliers(const WeightTriangle& tri, std::span<const double> ys,
                                        const RegimeModel& model, double threshold) {
  if (ys.size() != tri.size()) throw InvalidArgument("flag_outliers: size mismatch");
  const Matrix p = tri.state_memberships();
  std::vector<OutlierScore> out(ys.size());
  for (std::size_t l = 0; l < ys.size(); ++l) {
    double score = 0.0;
    for (std::size_t i = 0; i < model.n_states(); ++i) {
      const double u = (ys[l] - model.drift()[i]) / model.vol()[i];
      score += p(l, i) * std::hypot(u, u * u - 1.0);
    }
    out[l] = {score, score > threshold};
  }
  return out;
}

RegimeModel EstimationTrace::final_model() const {
  if (!batches.empty()) {
    const BatchRecord& b = batches.back();
    return RegimeModel(b.transition, b.drift, b.vol);
  }
  if (init) return init->model;
  throw Error("final_model: the run produced no estimates");
}

namespace {

void check_series(std::span<const double> ys, const BatchConfig& cfg) {
  cfg.validate();
  if (ys.size() < cfg.batch_len) throw InvalidArgument("run: series shorter than one batch");
  for (double y : ys) {
    if (!std::isfinite(y)) throw InvalidArgument("run: observations must be finite");
  }
}

EstimationTrace run_from(std::span<const double> ys, EstimationTrace trace);

}  // namespace

EstimationTrace run(std::span<const double> ys, std::size_t n_states, const BatchConfig& cfg) {
  check_series(ys, cfg);
  if (n_states == 0) throw InvalidArgument("run: need at least one state");
  EstimationTrace trace;
  trace.config = cfg;
  trace.n_states = n_states;
  const std::size_t first_len = std::min(cfg.first_batch_len(), ys.size());
  const std::span<const double> window = ys.first(first_len);
  trace.init = cfg.resolved_init() == InitMethod::classical
                   ? classical_init(window, n_states, derive_seed(cfg.seed, 1), cfg.gmm,
                                    cfg.pi_start)
                   : robust_init(window, n_states, derive_seed(cfg.seed, 1), cfg.redistribution,
                                 cfg.gmm, cfg.pi_start);
  return run_from(ys, std::move(trace));
}

EstimationTrace run(std::span<const double> ys, const RegimeModel& start,
                    const StateDistribution& x0, const BatchConfig& cfg) {
  check_series(ys, cfg);
  if (x0.size() != start.n_states()) throw InvalidArgument("run: x0 has wrong size");
  EstimationTrace trace;
  trace.config = cfg;
  trace.n_states = start.n_states();
  const std::size_t n = start.n_states();
  Matrix w(0, n);
  trace.init = InitResult{start, x0, w, MixtureFit{}, std::nullopt, "given"};
  return run_from(ys, std::move(trace));
}

namespace {

EstimationTrace run_from(std::span<const double> ys, EstimationTrace trace) {
  const BatchConfig& cfg = trace.config;
  const std::size_t n_states = trace.n_states;
  const std::size_t t = ys.size();
  const std::size_t first_len = std::min(cfg.first_batch_len(), t);
  trace.flag_threshold = outlier_threshold(cfg.outlier_q, 100000, derive_seed(cfg.seed, 3));

  RegimeModel model = trace.init->model;
  FilterBank bank = init_filters(trace.init->x0);
  MembershipTracker tracker(n_states);

  std::vector<double> draws;
  if (cfg.mode == Mode::robust) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 2));
    std::normal_distribution<double> normal;
    draws.resize(cfg.mc_size);
    for (double& z : draws) z = normal(rng);
  }

  const Estimator estimator = cfg.resolved_estimator();
  const ReferenceChoice ref_choice = cfg.resolved_reference();

  std::optional<LambdaCalibration> held;
  std::size_t start = 0;
  for (std::size_t b = 0; start < t; ++b) {
    const std::size_t len = b == 0 ? first_len : cfg.batch_len;
    const std::size_t end = std::min(t, start + len);
    const std::span<const double> seen = ys.first(end);
    const std::span<const double> batch = ys.subspan(start, end - start);

    ReferenceMeasure ref;
    switch (ref_choice) {
      case ReferenceChoice::sd: ref = ReferenceMeasure::from_sd(seen); break;
      case ReferenceChoice::mad: ref = ReferenceMeasure::from_mad(seen); break;
      default: ref = ReferenceMeasure::standard(); break;
    }

    BatchRecord rec;
    rec.index = b + 1;
    rec.first = start + 1;
    rec.last = end;
    rec.sigma_bar = ref.sigma_bar;
    rec.flagged = 0;

    LambdaCalibration calib;
    if (cfg.mode == Mode::robust && !cfg.recalibrate && held) {
      calib = *held;
      rec.calibration = calib;
    } else if (cfg.mode == Mode::robust) {
      const StateDistribution dist = StateDistribution::normalized(bank.eta_x);
      try {
        calib = calibrate_clipping(model, ref, dist, cfg.alpha, draws);
      } catch (const BracketError&) {
        calib = calibrate_clipping(model, ref, dist, 1.0, draws);
        rec.note = "clipping target not attainable; batch run without clipping";
      }
      rec.calibration = calib;
      held = calib;
    }

    tracker.clear();
    const std::size_t first_step = trace.steps.size();
    try {
      for (std::size_t l = start; l < end; ++l) {
        const double y = ys[l];
        const std::vector<double> prior = normalized_state(bank);
        double forecast = 0.0;
        for (std::size_t i = 0; i < n_states; ++i) forecast += model.drift()[i] * prior[i];

        std::vector<double> gammas(n_states);
        if (cfg.mode == Mode::robust) {
          gammas = robust_gammas(model, ref, calib, y);
        } else {
          for (std::size_t i = 0; i < n_states; ++i) {
            try {
              gammas[i] = gamma(model, ref, y, i);
            } catch (const BreakdownError& e) {
              throw BreakdownError(e.what(), l + 1, y, e.quantity());
            }
          }
        }
        tracker.advance(model, gammas, bank.eta_x);
        bank = step(bank, model, gammas, y);
        const double z = bank.mass();
        bank = rescale(bank);
        tracker.scale(1.0 / z);
        trace.steps.push_back({l + 1, b + 1, y, forecast, bank.eta_x, {}, 0.0, false});
      }
    } catch (const BreakdownError& e) {
      trace.breakdown = BreakdownInfo{e.step(), e.y(), e.quantity(), e.what()};
      return trace;
    }

    const FilterEstimates est = normalize(bank);
    const double eps = cfg.freeze_eps * static_cast<double>(bank.k);
    const WeightTriangle tri = build_weight_triangle(tracker, bank);

    std::vector<double> drift, vol;
    Matrix pi;
    std::vector<bool> frozen(n_states, false);
    if (estimator == Estimator::mle) {
      ModelUpdate u = m_step_classical(est, model, eps);
      drift = std::move(u.drift);
      vol = std::move(u.vol);
      pi = std::move(u.transition);
      frozen = std::move(u.frozen);
    } else {
      for (std::size_t i = 0; i < n_states; ++i) frozen[i] = est.occupation[i] <= eps;
      RobustM1Options opt;
      opt.first_batch = b == 0;
      opt.sigma_floor = cfg.mad_floor * ReferenceMeasure::from_mad(seen).sigma_bar;
      opt.consistency_reps = cfg.consistency_reps;
      opt.seed = derive_seed(cfg.seed, 100 + b);
      WeightedSums s = m1_robust(tri, batch, model.drift(), model.vol(), frozen, opt);
      drift = std::move(s.drift);
      vol = std::move(s.vol);
      pi = m2_pi(est, model, eps);
    }
    model = RegimeModel(pi, drift, vol);

    const std::vector<OutlierScore> flags = flag_outliers(tri, batch, model, trace.flag_threshold);
    const Matrix memb = tri.state_memberships();
    for (std::size_t l = 0; l < batch.size(); ++l) {
      StepRecord& s = trace.steps[first_step + l];
      s.membership.resize(n_states);
      for (std::size_t i = 0; i < n_states; ++i) s.membership[i] = memb(l, i);
      s.score = flags[l].score;
      s.flagged = flags[l].flagged;
      if (s.flagged) ++rec.flagged;
    }

    rec.drift = drift;
    rec.vol = vol;
    rec.transition = pi;
    rec.gain = tri.gain;
    rec.noether = tri.noether();
    rec.frozen = frozen;
    trace.batches.push_back(std::move(rec));
    start = end;
  }
  return trace;
}

}  // namespace

}  // namespace rhmm
