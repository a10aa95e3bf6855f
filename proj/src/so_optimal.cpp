#include "rhmm/so_optimal.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rhmm/error.hpp"
#include "rhmm/measure_change.hpp"
#include "rhmm/rng.hpp"
#include "rhmm/simd/kernels.hpp"
#include "rhmm/simulator.hpp"

namespace rhmm {

namespace {

double integrate(const std::function<double(double)>& f, double a, double b) {
  if (!(b > a)) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 31>::integrate(f, a, b, 20, 1e-15);
}

void check_rate(double rate) {
  if (!(rate > 0.0 && rate < 1.0)) throw InvalidArgument("contamination rate must lie in (0, 1)");
}

RiskEstimate mean_se(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace

IdealLaw IdealLaw::normal(double mean, double sd) {
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean)) {
    throw InvalidArgument("IdealLaw::normal: need finite mean and positive sd");
  }
  IdealLaw law;
  law.mean_ = mean;
  law.var_ = sd * sd;
  law.sampler_ = [mean, sd](std::mt19937_64& rng) {
    return mean + sd * std::normal_distribution<double>()(rng);
  };
  law.density_ = [sd](double x) { return 2.0 * normal_pdf(x / sd) / sd; };
  law.upper_ = 40.0 * sd;
  return law;
}

IdealLaw IdealLaw::from_sampler(Sampler sampler, std::size_t mc_size, std::uint64_t seed) {
  if (!sampler) throw InvalidArgument("IdealLaw::from_sampler: empty sampler");
  if (mc_size < 2) throw InvalidArgument("IdealLaw::from_sampler: need at least two draws");
  IdealLaw law;
  std::mt19937_64 rng(seed);
  std::vector<double> ys(mc_size);
  for (double& y : ys) y = sampler(rng);
  double m = 0.0;
  for (double y : ys) m += y;
  m /= static_cast<double>(mc_size);
  double ss = 0.0;
  law.abs_dev_.resize(mc_size);
  for (std::size_t k = 0; k < mc_size; ++k) {
    const double d = ys[k] - m;
    ss += d * d;
    law.abs_dev_[k] = std::abs(d);
  }
  law.mean_ = m;
  law.var_ = ss / static_cast<double>(mc_size);
  law.sampler_ = std::move(sampler);
  return law;
}

double IdealLaw::positive_part(double rho) const {
  if (!(rho > 0.0)) throw InvalidArgument("positive_part: rho must be positive");
  if (has_density()) {
    const auto& q = density_;
    return integrate([&](double x) { return (x / rho - 1.0) * q(x); }, rho, upper_);
  }
  return simd::positive_part_mean(abs_dev_, rho);
}

double IdealLaw::clipped_second_moment(double rho) const {
  if (!(rho >= 0.0)) throw InvalidArgument("clipped_second_moment: rho must be non-negative");
  if (has_density()) {
    const auto& q = density_;
    const double inner = integrate([&](double x) { return x * x * q(x); }, 0.0, std::min(rho, upper_));
    const double tail = integrate(q, rho, upper_);
    return inner + rho * rho * tail;
  }
  double acc = 0.0;
  for (double d : abs_dev_) {
    const double c = std::min(d, rho);
    acc += c * c;
  }
  return acc / static_cast<double>(abs_dev_.size());
}

double mass_residual(const IdealLaw& law, double rate, double rho) {
  check_rate(rate);
  return (1.0 - rate) / rate * law.positive_part(rho) - 1.0;
}

double solve_rho(const IdealLaw& law, double rate, double tol) {
  check_rate(rate);
  const double scale = law.sd() > 0.0 ? law.sd() : 1.0;
  double lo = 1e-8 * scale;
  double hi = scale;
  const double f_lo = mass_residual(law, rate, lo);
  if (!(f_lo > 0.0)) {
    throw BracketError("solve_rho: mass condition has no root", lo, hi, f_lo,
                       mass_residual(law, rate, hi));
  }
  double f_hi = mass_residual(law, rate, hi);
  for (int grow = 0; f_hi > 0.0 && grow < 200; ++grow) {
    lo = hi;
    hi *= 2.0;
    f_hi = mass_residual(law, rate, hi);
  }
  if (f_hi > 0.0) throw BracketError("solve_rho: mass condition has no root", lo, hi, f_lo, f_hi);
  for (int it = 0; it < 400 && (hi - lo) > tol * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass_residual(law, rate, mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SoProblem make_problem(IdealLaw law, double rate) {
  const double rho = solve_rho(law, rate);
  return SoProblem{std::move(law), rate, rho};
}

double reconstruct(const SoProblem& p, double y) {
  if (std::isinf(p.rho)) return y;
  if (!(p.rho > 0.0)) throw InvalidArgument("reconstruct: rho has not been solved");
  return p.law.mean() + std::clamp(y - p.law.mean(), -p.rho, p.rho);
}

std::array<double, 2> reconstruct(std::array<double, 2> mean, double rho, std::array<double, 2> y) {
  if (!(rho > 0.0)) throw InvalidArgument("reconstruct: rho must be positive");
  std::array<double, 2> d{y[0] - mean[0], y[1] - mean[1]};
  const double norm = std::hypot(d[0], d[1]);
  if (norm > rho) {
    d[0] *= rho / norm;
    d[1] *= rho / norm;
  }
  return {mean[0] + d[0], mean[1] + d[1]};
}

double saddle_risk(const SoProblem& p) {
  return saddle_risk_without_contamination_term(p) - p.rate * p.rho * p.rho;
}

double saddle_risk_without_contamination_term(const SoProblem& p) {
  return p.law.variance() - (1.0 - p.rate) * p.law.clipped_second_moment(p.rho);
}

RiskEstimate so_risk(const IdealLaw& law, double rate, const std::function<double(double)>& f,
                     const Sampler& contaminator, std::size_t draws, std::uint64_t seed) {
  if (draws < 2) throw InvalidArgument("so_risk: need at least two draws");
  std::mt19937_64 rng_id(derive_seed(seed, 0));
  std::mt19937_64 rng_u(derive_seed(seed, 1));
  std::mt19937_64 rng_di(derive_seed(seed, 2));
  std::bernoulli_distribution switch_on(rate);
  std::vector<double> loss(draws);
  for (std::size_t k = 0; k < draws; ++k) {
    const double yid = law.draw(rng_id);
    const double yre = switch_on(rng_u) ? contaminator(rng_di) : yid;
    const double e = f(yre) - yid;
    loss[k] = e * e;
  }
  return mean_se(loss);
}

std::vector<Contaminator> default_contaminators(const SoProblem& p) {
  const double mu = p.law.mean();
  const double rho = p.rho;
  const double sd = p.law.sd();
  auto point = [](double v) { return [v](std::mt19937_64&) { return v; }; };
  std::vector<Contaminator> out;
  out.push_back({"point_inside", point(mu + 0.5 * rho)});
  out.push_back({"point_boundary", point(mu + rho)});
  out.push_back({"point_far", point(mu + 10.0 * rho)});
  out.push_back({"point_far_negative", point(mu - 10.0 * rho)});
  out.push_back({"two_point", [mu, rho](std::mt19937_64& rng) {
                   return std::bernoulli_distribution(0.5)(rng) ? mu + 3.0 * rho : mu - 3.0 * rho;
                 }});
  out.push_back({"wide_normal", [mu, sd](std::mt19937_64& rng) {
                   return mu + 10.0 * sd * std::normal_distribution<double>()(rng);
                 }});
  out.push_back({"uniform", [mu, rho](std::mt19937_64& rng) {
                   return std::uniform_real_distribution<double>(mu - 20.0 * rho, mu + 20.0 * rho)(rng);
                 }});
  out.push_back({"ideal", p.law.sampler()});
  return out;
}

SaddleReport verify_saddle_point(const SoProblem& p, const std::vector<Contaminator>& alternatives,
                                 std::size_t draws, std::uint64_t seed) {
  if (draws < 2) throw InvalidArgument("verify_saddle_point: need at least two draws");
  SaddleReport rep;
  rep.rate = p.rate;
  rep.rho = p.rho;
  rep.residual = mass_residual(p.law, p.rate, p.rho);
  rep.backend = p.law.backend();
  rep.saddle_value = saddle_risk(p);
  rep.uncorrected_value = saddle_risk_without_contamination_term(p);
  rep.draws = draws;
  rep.seed = seed;

  std::mt19937_64 rng_id(derive_seed(seed, 0));
  std::mt19937_64 rng_u(derive_seed(seed, 1));
  std::bernoulli_distribution switch_on(p.rate);
  std::vector<double> yid(draws);
  std::vector<std::size_t> hit;
  for (std::size_t k = 0; k < draws; ++k) {
    yid[k] = p.law.draw(rng_id);
    if (switch_on(rng_u)) hit.push_back(k);
  }

  const Sampler p0 = least_favorable_contaminator(p.law, p.rate, p.rho);
  std::mt19937_64 rng_p0(derive_seed(seed, 2));
  std::vector<double> y0(draws);
  for (std::size_t k = 0; k < draws; ++k) y0[k] = yid[k];
  for (std::size_t k : hit) y0[k] = p0(rng_p0);

  auto losses = [&](const std::function<double(double)>& f, const std::vector<double>& yre) {
    std::vector<double> l(draws);
    for (std::size_t k = 0; k < draws; ++k) {
      const double e = f(yre[k]) - yid[k];
      l[k] = e * e;
    }
    return l;
  };
  const auto f0 = [&](double y) { return reconstruct(p, y); };
  const std::vector<double> loss0 = losses(f0, y0);
  rep.risk_p0 = mean_se(loss0);
  rep.risk_matches = std::abs(rep.risk_p0.mean - rep.saddle_value) <= 2.0 * rep.risk_p0.se;

  for (std::size_t a = 0; a < alternatives.size(); ++a) {
    std::mt19937_64 rng_alt(derive_seed(seed, 100 + a));
    std::vector<double> ya = yid;
    for (std::size_t k : hit) ya[k] = alternatives[a].sampler(rng_alt);
    const std::vector<double> la = losses(f0, ya);
    std::vector<double> diff(draws);
    for (std::size_t k = 0; k < draws; ++k) diff[k] = la[k] - loss0[k];
    const RiskEstimate d = mean_se(diff);
    rep.contaminators.push_back(
        {alternatives[a].name, mean_se(la), d.mean, d.se, d.mean <= 2.0 * d.se});
  }

  const double mu = p.law.mean();
  const double rho = p.rho;
  const std::vector<std::pair<std::string, std::function<double(double)>>> recs = {
      {"identity", [](double y) { return y; }},
      {"hard_rejection", [mu, rho](double y) { return std::abs(y - mu) > rho ? mu : y; }},
  };
  for (const auto& [name, f] : recs) {
    const RiskEstimate r = mean_se(losses(f, y0));
    rep.reconstructions.push_back({name, r, r.mean >= rep.risk_p0.mean});
  }
  return rep;
}

}  // namespace rhmm
