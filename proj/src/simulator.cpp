#include "rhmm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rhmm/error.hpp"
#include "rhmm/io.hpp"
#include "rhmm/rng.hpp"

namespace rhmm {

namespace {

std::size_t draw_state(std::mt19937_64& rng, const Matrix& pi, std::size_t from) {
  const double u = std::uniform_real_distribution<double>()(rng);
  double cum = 0.0;
  const std::size_t n = pi.rows();
  for (std::size_t j = 0; j < n; ++j) {
    cum += pi(j, from);
    if (u < cum) return j;
  }
  for (std::size_t j = n; j-- > 0;) {
    if (pi(j, from) > 0.0) return j;
  }
  return n - 1;
}

std::size_t draw_initial(std::mt19937_64& rng, const StateDistribution& x0) {
  const double u = std::uniform_real_distribution<double>()(rng);
  double cum = 0.0;
  for (std::size_t j = 0; j < x0.size(); ++j) {
    cum += x0[j];
    if (u < cum) return j;
  }
  for (std::size_t j = x0.size(); j-- > 0;) {
    if (x0[j] > 0.0) return j;
  }
  return x0.size() - 1;
}

}  // namespace

ContaminationSpec ContaminationSpec::none() { return ContaminationSpec{}; }

ContaminationSpec ContaminationSpec::fixed(std::vector<std::size_t> positions,
                                           std::vector<double> values, std::string label) {
  if (positions.size() != values.size()) {
    throw InvalidArgument("ContaminationSpec::fixed: positions and values differ in length");
  }
  ContaminationSpec s;
  s.mechanism = Mechanism::fixed_positions;
  s.positions = std::move(positions);
  s.values = std::move(values);
  s.label = std::move(label);
  return s;
}

ContaminationSpec ContaminationSpec::iid(double rate, Sampler distortion, std::string label) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("ContaminationSpec::iid: rate must lie in [0, 1)");
  if (!distortion) throw InvalidArgument("ContaminationSpec::iid: missing distortion sampler");
  ContaminationSpec s;
  s.mechanism = Mechanism::iid_switch;
  s.rate = rate;
  s.distortion = std::move(distortion);
  s.label = std::move(label);
  return s;
}

SimulatedPath simulate_hmm(const RegimeModel& model, const StateDistribution& x0,
                           std::size_t horizon, std::uint64_t seed) {
  if (horizon == 0) throw InvalidArgument("simulate_hmm: horizon must be positive");
  if (x0.size() != model.n_states()) throw InvalidArgument("simulate_hmm: x0 has wrong size");
  std::mt19937_64 chain_rng(derive_seed(seed, 0));
  std::mt19937_64 noise_rng(derive_seed(seed, 1));
  std::normal_distribution<double> normal;

  SimulatedPath p;
  p.states.resize(horizon + 1);
  std::vector<double> ys(horizon);
  p.states[0] = draw_initial(chain_rng, x0);
  for (std::size_t k = 1; k <= horizon; ++k) {
    const std::size_t prev = p.states[k - 1];
    ys[k - 1] = model.drift()[prev] + model.vol()[prev] * normal(noise_rng);
    p.states[k] = draw_state(chain_rng, model.transition(), prev);
  }
  p.clean = ReturnSeries(ys);
  p.observed = ReturnSeries(std::move(ys));
  p.outlier_mask.assign(horizon, false);
  return p;
}

SimulatedPath contaminate(const SimulatedPath& path, const ContaminationSpec& spec,
                          std::uint64_t seed) {
  SimulatedPath out = path;
  std::vector<double> ys(path.observed.values().begin(), path.observed.values().end());
  const std::size_t t = ys.size();
  switch (spec.mechanism) {
    case ContaminationSpec::Mechanism::none:
      return out;
    case ContaminationSpec::Mechanism::fixed_positions:
      for (std::size_t j = 0; j < spec.positions.size(); ++j) {
        const std::size_t pos = spec.positions[j];
        if (pos < 1 || pos > t) {
          throw InvalidArgument("contaminate: position " + std::to_string(pos) +
                                " outside 1.." + std::to_string(t));
        }
        if (!std::isfinite(spec.values[j])) throw InvalidArgument("contaminate: non-finite value");
        ys[pos - 1] = spec.values[j];
        out.outlier_mask[pos - 1] = true;
      }
      break;
    case ContaminationSpec::Mechanism::iid_switch: {
      std::mt19937_64 switch_rng(derive_seed(seed, 10));
      std::mt19937_64 distortion_rng(derive_seed(seed, 11));
      std::bernoulli_distribution u(spec.rate);
      for (std::size_t k = 0; k < t; ++k) {
        if (u(switch_rng)) {
          ys[k] = spec.distortion(distortion_rng);
          out.outlier_mask[k] = true;
        }
      }
      break;
    }
  }
  out.observed = ReturnSeries(std::move(ys));
  return out;
}

Sampler least_favorable_contaminator(const IdealLaw& law, double rate, double rho) {
  if (!(rho > 0.0)) throw InvalidArgument("least_favorable_contaminator: rho must be positive");
  const double residual = mass_residual(law, rate, rho);
  if (std::abs(residual) > 1e-6) {
    throw InvalidArgument("least_favorable_contaminator: rho violates the mass condition (residual " +
                          std::to_string(residual) + ")");
  }
  const double mu = law.mean();
  const double cut = 12.0 * law.sd();
  const double w_max = cut / rho - 1.0;
  if (!(w_max > 0.0)) {
    throw InvalidArgument("least_favorable_contaminator: rho exceeds the sampling cut-off");
  }
  return [law, mu, rho, cut, w_max](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif;
    for (;;) {
      const double y = law.draw(rng);
      const double d = std::abs(y - mu);
      if (d > cut) continue;
      const double w = d / rho - 1.0;
      if (w > 0.0 && unif(rng) * w_max < w) return y;
    }
  };
}

RegimeModel demo_model() {
  return RegimeModel(Matrix::from_rows({{0.85, 0.05}, {0.15, 0.95}}), {-2.0, 1.2}, {6.0, 3.0});
}

std::vector<std::size_t> planted_positions() { return {40, 80, 130, 140}; }

double preset_multiplier(const std::string& preset) {
  if (preset == "considerable") return 6.0;
  if (preset == "severe") return 25.0;
  throw InvalidArgument("unknown contamination preset '" + preset + "'");
}

ContaminationSpec preset_contamination(const std::string& preset, const RegimeModel& model) {
  if (preset == "none") return ContaminationSpec::none();
  const MarginalMoments mm = marginal_moments(model, stationary_distribution(model));
  const double value = mm.mean + preset_multiplier(preset) * mm.sd;
  const auto pos = planted_positions();
  return ContaminationSpec::fixed(pos, std::vector<double>(pos.size(), value), preset);
}

ContaminationSpec parse_contamination(const std::string& text, const RegimeModel& model) {
  if (text == "none" || text == "considerable" || text == "severe") {
    return preset_contamination(text, model);
  }
  const std::string prefix = "fixed:";
  if (text.rfind(prefix, 0) != 0) {
    throw InvalidArgument("contamination must be none, considerable, severe or fixed:POS=VALUE,...");
  }
  std::vector<std::size_t> positions;
  std::vector<double> values;
  std::stringstream ss(text.substr(prefix.size()));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("contamination entry '" + item + "' is not POS=VALUE");
    }
    try {
      std::size_t used = 0;
      const long pos = std::stol(item.substr(0, eq), &used);
      if (used != eq || pos < 1) throw InvalidArgument("bad position");
      const std::string v = item.substr(eq + 1);
      const double value = std::stod(v, &used);
      if (used != v.size()) throw InvalidArgument("bad value");
      positions.push_back(static_cast<std::size_t>(pos));
      values.push_back(value);
    } catch (const std::exception&) {
      throw InvalidArgument("contamination entry '" + item + "' is not POS=VALUE");
    }
  }
  if (positions.empty()) throw InvalidArgument("fixed contamination needs at least one entry");
  return ContaminationSpec::fixed(std::move(positions), std::move(values), text);
}

void write_path_csv(std::ostream& os, const SimulatedPath& path) {
  os << "index,state,clean,observed,is_outlier\n";
  for (std::size_t k = 0; k < path.size(); ++k) {
    os << (k + 1) << ',' << (path.states[k] + 1) << ',' << io::format_double(path.clean[k]) << ','
       << io::format_double(path.observed[k]) << ',' << (path.outlier_mask[k] ? 1 : 0) << '\n';
  }
}

}  // namespace rhmm
