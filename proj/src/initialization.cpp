#include "rhmm/initialization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "rhmm/error.hpp"
#include "rhmm/measure_change.hpp"
#include "rhmm/rng.hpp"
#include "rhmm/robust_core.hpp"

namespace rhmm {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct Params {
  std::vector<double> means, sds, freqs;
};

double log_density(double y, double m, double s) {
  const double u = (y - m) / s;
  return -0.5 * u * u - std::log(s) - kHalfLog2Pi;
}

// Fills resp (T x K) and returns the log-likelihood.
double e_step(std::span<const double> ys, const Params& p, Matrix& resp) {
  const std::size_t t = ys.size();
  const std::size_t k = p.means.size();
  std::vector<double> l(k);
  double ll = 0.0;
  for (std::size_t r = 0; r < t; ++r) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      l[c] = std::log(p.freqs[c]) + log_density(ys[r], p.means[c], p.sds[c]);
      top = std::max(top, l[c]);
    }
    double s = 0.0;
    for (std::size_t c = 0; c < k; ++c) s += std::exp(l[c] - top);
    for (std::size_t c = 0; c < k; ++c) resp(r, c) = std::exp(l[c] - top) / s;
    ll += top + std::log(s);
  }
  return ll;
}

std::vector<double> kmeanspp(std::span<const double> ys, std::size_t k, std::mt19937_64& rng) {
  std::vector<double> centers;
  std::uniform_int_distribution<std::size_t> pick(0, ys.size() - 1);
  centers.push_back(ys[pick(rng)]);
  std::vector<double> d2(ys.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t r = 0; r < ys.size(); ++r) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (ys[r] - c) * (ys[r] - c));
      d2[r] = best;
      total += best;
    }
    if (!(total > 0.0)) {
      centers.push_back(ys[pick(rng)]);
      continue;
    }
    const double u = std::uniform_real_distribution<double>(0.0, total)(rng);
    double cum = 0.0;
    std::size_t chosen = ys.size() - 1;
    for (std::size_t r = 0; r < ys.size(); ++r) {
      cum += d2[r];
      if (u < cum) {
        chosen = r;
        break;
      }
    }
    centers.push_back(ys[chosen]);
  }
  return centers;
}

double population_sd(std::span<const double> ys) {
  const double m = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
  double ss = 0.0;
  for (double y : ys) ss += (y - m) * (y - m);
  return std::sqrt(ss / static_cast<double>(ys.size()));
}

RegimeModel model_from(std::vector<double> f, std::vector<double> s, std::span<const double> freq) {
  const std::size_t n = f.size();
  Matrix pi(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) pi(j, i) = freq[j];
  }
  return RegimeModel(std::move(pi), std::move(f), std::move(s));
}

std::vector<double> normalized(std::vector<double> v) {
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x /= total;
  return v;
}

RegimeModel model_from(std::vector<double> f, std::vector<double> s, std::span<const double> freq,
                       const Matrix& weights, TransitionStart pi_start) {
  if (pi_start == TransitionStart::frequencies) return model_from(std::move(f), std::move(s), freq);
  return RegimeModel(transition_counts(weights, freq), std::move(f), std::move(s));
}

}  // namespace

Matrix transition_counts(const Matrix& weights, std::span<const double> fallback) {
  const std::size_t n = weights.cols();
  if (fallback.size() != n) throw InvalidArgument("transition_counts: fallback has wrong size");
  Matrix pi(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double from = 0.0;
    for (std::size_t t = 1; t < weights.rows(); ++t) {
      from += weights(t - 1, i);
      for (std::size_t j = 0; j < n; ++j) pi(j, i) += weights(t - 1, i) * weights(t, j);
    }
    double col = 0.0;
    for (std::size_t j = 0; j < n; ++j) col += pi(j, i);
    for (std::size_t j = 0; j < n; ++j) {
      pi(j, i) = from > 1e-12 && col > 0.0 ? pi(j, i) / col : fallback[j];
    }
  }
  return pi;
}

MixtureFit fit_gmm(std::span<const double> ys, std::size_t n_components, std::uint64_t seed,
                   const GmmOptions& opt) {
  const std::size_t t = ys.size();
  const std::size_t k = n_components;
  if (k == 0) throw InvalidArgument("fit_gmm: need at least one component");
  if (t < 2 * k) throw InvalidArgument("fit_gmm: need at least two observations per component");
  if (opt.restarts == 0) throw InvalidArgument("fit_gmm: restarts must be positive");

  const double scale = ReferenceMeasure::from_mad(ys).sigma_bar;
  const double floor = 1e-6 * scale;
  const double sd0 = std::max(population_sd(ys), floor);

  MixtureFit best;
  bool have_best = false;
  std::size_t rejected = 0;
  Matrix resp(t, k);

  for (std::size_t restart = 0; restart < opt.restarts; ++restart) {
    std::mt19937_64 rng(derive_seed(seed, restart));
    Params p{kmeanspp(ys, k, rng), std::vector<double>(k, sd0), std::vector<double>(k, 1.0 / k)};
    double ll = e_step(ys, p, resp);
    bool degenerate = false;
    std::vector<bool> pinned(k, false);
    std::size_t it = 0;
    for (; it < opt.max_iter; ++it) {
      for (std::size_t c = 0; c < k; ++c) {
        if (pinned[c]) {
          double nk = 0.0;
          for (std::size_t r = 0; r < t; ++r) nk += resp(r, c);
          p.freqs[c] = nk / static_cast<double>(t);
          continue;
        }
        double nk = 0.0, sy = 0.0;
        for (std::size_t r = 0; r < t; ++r) {
          nk += resp(r, c);
          sy += resp(r, c) * ys[r];
        }
        if (!(nk > 1e-8)) {
          degenerate = true;
          break;
        }
        const double m = sy / nk;
        double ss = 0.0;
        for (std::size_t r = 0; r < t; ++r) ss += resp(r, c) * (ys[r] - m) * (ys[r] - m);
        p.means[c] = m;
        p.sds[c] = std::max(std::sqrt(ss / nk), floor);
        p.freqs[c] = nk / static_cast<double>(t);
        if (p.sds[c] <= floor * (1.0 + 1e-9)) {
          pinned[c] = true;
          p.sds[c] = floor;
          if (static_cast<std::size_t>(std::count(pinned.begin(), pinned.end(), true)) >
              opt.max_collapsed) {
            degenerate = true;
          }
        }
      }
      if (degenerate) break;
      const double prev = ll;
      ll = e_step(ys, p, resp);
      if (!std::isfinite(ll)) {
        degenerate = true;
        break;
      }
      if (std::abs(ll - prev) <= opt.tol * (1.0 + std::abs(ll))) {
        ++it;
        break;
      }
    }
    if (degenerate) {
      ++rejected;
      continue;
    }
    const auto n_pinned = static_cast<std::size_t>(std::count(pinned.begin(), pinned.end(), true));
    if (!have_best || n_pinned < best.collapsed ||
        (n_pinned == best.collapsed && ll > best.log_likelihood)) {
      std::vector<std::size_t> order(k);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return p.means[a] < p.means[b]; });
      best.n_components = k;
      best.means.resize(k);
      best.sds.resize(k);
      best.frequencies.resize(k);
      best.responsibilities = Matrix(t, k);
      for (std::size_t c = 0; c < k; ++c) {
        best.means[c] = p.means[order[c]];
        best.sds[c] = p.sds[order[c]];
        best.frequencies[c] = p.freqs[order[c]];
        for (std::size_t r = 0; r < t; ++r) best.responsibilities(r, c) = resp(r, order[c]);
      }
      best.frequencies = normalized(best.frequencies);
      best.log_likelihood = ll;
      best.iterations = it;
      best.collapsed = n_pinned;
      have_best = true;
    }
  }
  if (!have_best) {
    throw Error("fit_gmm: every restart collapsed a component onto a single value; "
                "use fewer components");
  }
  best.rejected_restarts = rejected;
  return best;
}

InitResult classical_init(std::span<const double> ys, std::size_t n_states, std::uint64_t seed,
                          const GmmOptions& opt, TransitionStart pi_start) {
  MixtureFit fit;
  try {
    fit = fit_gmm(ys, n_states, seed, opt);
  } catch (const InvalidArgument&) {
    throw;
  } catch (const Error&) {
    // A cluster made of repeated or isolated values carries no scale; give
    // it the spread of the whole window instead.
    GmmOptions relaxed = opt;
    relaxed.max_collapsed = n_states - 1;
    fit = fit_gmm(ys, n_states, seed, relaxed);
    const double floor = 1e-6 * ReferenceMeasure::from_mad(ys).sigma_bar;
    const double sd = std::max(population_sd(ys), floor);
    for (double& s : fit.sds) {
      if (s <= floor * (1.0 + 1e-9)) s = sd;
    }
  }
  RegimeModel model =
      model_from(fit.means, fit.sds, fit.frequencies, fit.responsibilities, pi_start);
  StateDistribution x0 = StateDistribution::normalized(fit.frequencies);
  Matrix weights = fit.responsibilities;
  return InitResult{std::move(model), std::move(x0), std::move(weights), std::move(fit),
                    std::nullopt, "classical"};
}

InitResult robust_init(std::span<const double> ys, std::size_t n_states, std::uint64_t seed,
                       Redistribution redistribution, const GmmOptions& opt,
                       TransitionStart pi_start) {
  const std::size_t n = n_states;
  if (n == 0) throw InvalidArgument("robust_init: need at least one state");
  GmmOptions noise_opt = opt;
  noise_opt.max_collapsed = std::max<std::size_t>(opt.max_collapsed, 1);
  MixtureFit fit = fit_gmm(ys, n + 1, seed, noise_opt);
  const std::size_t t = ys.size();

  std::size_t noise = 0;
  for (std::size_t c = 1; c <= n; ++c) {
    const double fc = fit.frequencies[c];
    const double fn = fit.frequencies[noise];
    if (fc < fn - 1e-12 || (std::abs(fc - fn) <= 1e-12 && fit.sds[c] > fit.sds[noise])) noise = c;
  }
  std::vector<std::size_t> kept;
  for (std::size_t c = 0; c <= n; ++c) {
    if (c != noise) kept.push_back(c);
  }
  std::vector<double> kept_freq(n);
  for (std::size_t j = 0; j < n; ++j) kept_freq[j] = fit.frequencies[kept[j]];
  kept_freq = normalized(kept_freq);

  Matrix w(t, n);
  std::mt19937_64 rng(derive_seed(seed, 1000));
  std::discrete_distribution<std::size_t> choose(kept_freq.begin(), kept_freq.end());
  std::vector<double> post(n);
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t j = 0; j < n; ++j) w(r, j) = fit.responsibilities(r, kept[j]);
    const double mass = fit.responsibilities(r, noise);
    if (redistribution == Redistribution::random) {
      w(r, choose(rng)) += mass;
    } else {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        post[j] = std::log(kept_freq[j]) + log_density(ys[r], fit.means[kept[j]], fit.sds[kept[j]]);
        top = std::max(top, post[j]);
      }
      double s = 0.0;
      for (double& v : post) s += (v = std::exp(v - top));
      for (std::size_t j = 0; j < n; ++j) w(r, j) += mass * post[j] / s;
    }
  }

  const double scale = ReferenceMeasure::from_mad(ys).sigma_bar;
  std::vector<double> f(n), s(n), freq(n, 0.0);
  std::vector<double> col(t);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t r = 0; r < t; ++r) {
      col[r] = w(r, j);
      freq[j] += col[r];
    }
    const WeightedSample sample(std::vector<double>(ys.begin(), ys.end()), col);
    f[j] = weighted_median(sample);
    const double c = mc_consistency_factor(col, 2000, derive_seed(seed, 2000 + j));
    s[j] = std::max(weighted_mad(sample, f[j], c), 1e-4 * scale);
  }
  freq = normalized(freq);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
  std::vector<double> fs(n), ss(n), qs(n);
  Matrix ws(t, n);
  for (std::size_t j = 0; j < n; ++j) {
    fs[j] = f[order[j]];
    ss[j] = s[order[j]];
    qs[j] = freq[order[j]];
    for (std::size_t r = 0; r < t; ++r) ws(r, j) = w(r, order[j]);
  }

  RegimeModel model = model_from(fs, ss, qs, ws, pi_start);
  StateDistribution x0 = StateDistribution::normalized(qs);
  return InitResult{std::move(model), std::move(x0), std::move(ws), std::move(fit), noise, "robust"};
}

}  // namespace rhmm
