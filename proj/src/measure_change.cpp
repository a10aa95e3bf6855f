#include "rhmm/measure_change.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "rhmm/error.hpp"
#include "rhmm/robust_core.hpp"
#include "rhmm/simd/kernels.hpp"

namespace rhmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median(std::span<const double> ys) {
  std::vector<double> w(ys.size(), 1.0);
  return weighted_median(ys, w);
}

void check_state(const RegimeModel& model, std::size_t i) {
  if (i >= model.n_states()) throw InvalidArgument("state index out of range");
}

// Largest root of a continuous f on [lo, hi] with f(hi) > 0, located by a
// grid scan followed by bisection.
double largest_root(auto&& f, double lo, double hi, std::size_t grid = 64) {
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  if (!(f_hi > 0.0)) {
    throw BracketError("calibrate_clipping: target mean not attainable", lo, hi, f_lo, f_hi);
  }
  double a = lo;
  bool found = f_lo < 0.0;
  for (std::size_t g = 1; g < grid; ++g) {
    const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid);
    if (f(x) < 0.0) {
      a = x;
      found = true;
    }
  }
  if (!found) {
    throw BracketError("calibrate_clipping: target mean not attainable", lo, hi, f_lo, f_hi);
  }
  double b = hi;
  for (int it = 0; it < 200 && (b - a) > 1e-14 * b; ++it) {
    const double mid = 0.5 * (a + b);
    (f(mid) < 0.0 ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

double clip_sqrt(double log_ratio, const LambdaCalibration& c) {
  const double half = 0.5 * log_ratio;
  if (std::isfinite(c.clip_b) && half > std::log(c.mean_sqrt + c.clip_b)) {
    return c.mean_sqrt + c.clip_b;
  }
  const double s = std::exp(half);
  return c.mean_sqrt + std::clamp(s - c.mean_sqrt, -c.clip_b, c.clip_b);
}

}  // namespace

double normal_pdf(double z) { return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal_quantile: p must be in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

ReferenceMeasure::ReferenceMeasure(double s) : sigma_bar(s) {
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw InvalidArgument("ReferenceMeasure: sigma_bar must be positive and finite");
  }
}

ReferenceMeasure ReferenceMeasure::from_mad(std::span<const double> ys) {
  if (ys.empty()) throw InvalidArgument("ReferenceMeasure::from_mad: no observations");
  const double m = median(ys);
  std::vector<double> dev(ys.size());
  for (std::size_t k = 0; k < ys.size(); ++k) dev[k] = std::abs(ys[k] - m);
  const double mad = median(dev) / normal_quantile(0.75);
  if (mad > 0.0) return ReferenceMeasure(mad);
  return from_sd(ys);
}

ReferenceMeasure ReferenceMeasure::from_sd(std::span<const double> ys) {
  if (ys.empty()) throw InvalidArgument("ReferenceMeasure::from_sd: no observations");
  double mean = 0.0;
  for (double y : ys) mean += y;
  mean /= static_cast<double>(ys.size());
  double ss = 0.0;
  for (double y : ys) ss += (y - mean) * (y - mean);
  const double sd = ys.size() > 1 ? std::sqrt(ss / static_cast<double>(ys.size() - 1)) : 0.0;
  return ReferenceMeasure(sd > 0.0 ? sd : 1.0);
}

double gamma(const RegimeModel& model, const ReferenceMeasure& ref, double y, std::size_t i) {
  check_state(model, i);
  const double f = model.drift()[i];
  const double s = model.vol()[i];
  const double num = normal_pdf((y - f) / s) / s;
  const double den = normal_pdf(y / ref.sigma_bar) / ref.sigma_bar;
  const double r = num / den;
  if (!std::isfinite(r)) {
    throw BreakdownError("density ratio of state " + std::to_string(i + 1) +
                             " is not finite at y = " + std::to_string(y),
                         0, y, "gamma[" + std::to_string(i + 1) + "]");
  }
  return r;
}

double gamma(const RegimeModel& model, double y, std::size_t i) {
  return gamma(model, ReferenceMeasure::standard(), y, i);
}

double log_gamma(const RegimeModel& model, const ReferenceMeasure& ref, double y, std::size_t i) {
  check_state(model, i);
  const double u = (y - model.drift()[i]) / model.vol()[i];
  const double v = y / ref.sigma_bar;
  return -0.5 * u * u - std::log(model.vol()[i]) + 0.5 * v * v + std::log(ref.sigma_bar);
}

double lambda_tilde(const RegimeModel& model, const ReferenceMeasure& ref, double y,
                    const StateDistribution& state_dist) {
  if (state_dist.size() != model.n_states()) {
    throw InvalidArgument("lambda_tilde: state distribution has wrong size");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < model.n_states(); ++i) {
    if (state_dist[i] > 0.0) s += state_dist[i] * gamma(model, ref, y, i);
  }
  if (!std::isfinite(s)) throw BreakdownError("lambda_tilde: not finite", 0, y, "lambda_tilde");
  return s;
}

LambdaCalibration calibrate_clipping(const RegimeModel& model, const ReferenceMeasure& ref,
                                     const StateDistribution& state_dist, double alpha,
                                     std::span<const double> standard_draws) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("calibrate_clipping: alpha must lie in (0, 1]");
  }
  if (state_dist.size() != model.n_states()) {
    throw InvalidArgument("calibrate_clipping: state distribution has wrong size");
  }
  if (standard_draws.empty()) throw InvalidArgument("calibrate_clipping: no draws");
  const std::size_t n = model.n_states();
  std::vector<double> log_coef(n), drift(model.drift().begin(), model.drift().end()), inv_vol(n);
  for (std::size_t i = 0; i < n; ++i) {
    log_coef[i] = std::log(state_dist[i]) - std::log(model.vol()[i]) + std::log(ref.sigma_bar);
    inv_vol[i] = 1.0 / model.vol()[i];
  }
  std::vector<double> ys(standard_draws.size());
  for (std::size_t k = 0; k < ys.size(); ++k) ys[k] = ref.sigma_bar * standard_draws[k];
  std::vector<double> roots(ys.size());
  simd::sqrt_mixture_ratio({log_coef, drift, inv_vol, 1.0 / ref.sigma_bar}, ys, roots);

  double m = 0.0;
  double spread = 0.0;
  for (double v : roots) m += v;
  m /= static_cast<double>(roots.size());
  for (double v : roots) spread = std::max(spread, std::abs(v - m));

  LambdaCalibration out;
  out.alpha = alpha;
  out.mean_sqrt = m;
  if (alpha == 1.0) {
    out.clip_b = kInf;
  } else {
    out.clip_b = largest_root(
        [&](double b) { return simd::clipped_square_mean(roots, m, b) - alpha; }, 0.0, spread);
  }
  out.consistency = 1.0 / simd::clipped_square_mean(roots, m, out.clip_b);
  return out;
}

LambdaCalibration calibrate_clipping(const RegimeModel& model, const ReferenceMeasure& ref,
                                     const StateDistribution& state_dist, double alpha,
                                     std::size_t mc_size, std::uint64_t seed) {
  if (mc_size < 10000) throw InvalidArgument("calibrate_clipping: mc_size must be at least 1e4");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> z(mc_size);
  for (double& v : z) v = normal(rng);
  return calibrate_clipping(model, ref, state_dist, alpha, z);
}

double lambda_bar(const RegimeModel& model, const ReferenceMeasure& ref,
                  const LambdaCalibration& calib, double y,
                  const StateDistribution& state_dist) {
  if (state_dist.size() != model.n_states()) {
    throw InvalidArgument("lambda_bar: state distribution has wrong size");
  }
  double top = -kInf;
  std::vector<double> l(model.n_states(), -kInf);
  for (std::size_t i = 0; i < model.n_states(); ++i) {
    if (state_dist[i] > 0.0) l[i] = std::log(state_dist[i]) + log_gamma(model, ref, y, i);
    top = std::max(top, l[i]);
  }
  double s = 0.0;
  for (double v : l) s += std::exp(v - top);
  const double v = clip_sqrt(top + std::log(s), calib);
  return calib.consistency * v * v;
}

std::vector<double> robust_gammas(const RegimeModel& model, const ReferenceMeasure& ref,
                                  const LambdaCalibration& calib, double y) {
  const std::size_t n = model.n_states();
  std::vector<double> l(n);
  for (std::size_t i = 0; i < n; ++i) l[i] = log_gamma(model, ref, y, i);
  std::vector<double> g(n);
  bool any = false;
  bool finite = true;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = clip_sqrt(l[i], calib);
    g[i] = calib.consistency * v * v;
    any = any || g[i] > 0.0;
    finite = finite && std::isfinite(g[i]);
  }
  if (!finite) {
    // Only reachable without clipping; a common factor per step cancels in
    // every normalized filter, so shift to the largest component.
    const double top = *std::max_element(l.begin(), l.end());
    for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(l[i] - top);
    return g;
  }
  if (!any) std::fill(g.begin(), g.end(), 1.0);
  return g;
}

}  // namespace rhmm
