#include "rhmm/recursive_filters.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "rhmm/error.hpp"

namespace rhmm {

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void check_dims(const FilterBank& bank, const RegimeModel& model) {
  if (bank.n != model.n_states()) throw InvalidArgument("filter bank and model differ in size");
}

// out += Pi (g .* v)
void add_propagated(const Matrix& pi, std::span<const double> g, const double* v, double* out,
                    std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double w = g[i] * v[i];
    if (w == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) out[j] += pi(j, i) * w;
  }
}

}  // namespace

double FilterBank::mass() const { return std::accumulate(eta_x.begin(), eta_x.end(), 0.0); }

FilterBank init_filters(const StateDistribution& x0) {
  FilterBank b;
  b.n = x0.size();
  b.k = 0;
  b.eta_x.assign(x0.probs().begin(), x0.probs().end());
  b.eta_j.assign(b.n * b.n * b.n, 0.0);
  b.eta_o.assign(b.n * b.n, 0.0);
  b.eta_t1.assign(b.n * b.n, 0.0);
  b.eta_t2.assign(b.n * b.n, 0.0);
  return b;
}

std::vector<double> propagate(const RegimeModel& model, std::span<const double> gammas,
                              std::span<const double> v) {
  const std::size_t n = model.n_states();
  if (gammas.size() != n || v.size() != n) throw InvalidArgument("propagate: size mismatch");
  std::vector<double> out(n, 0.0);
  add_propagated(model.transition(), gammas, v.data(), out.data(), n);
  return out;
}

FilterBank step(const FilterBank& bank, const RegimeModel& model, std::span<const double> gammas,
                double y) {
  check_dims(bank, model);
  const std::size_t n = bank.n;
  const std::size_t k = bank.k + 1;
  if (gammas.size() != n) throw InvalidArgument("step: gammas has wrong size");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(gammas[i]) || gammas[i] < 0.0) {
      throw BreakdownError("density ratio of state " + std::to_string(i + 1) + " is not finite",
                           k, y, "gamma[" + std::to_string(i + 1) + "]");
    }
  }
  const Matrix& pi = model.transition();

  FilterBank next;
  next.n = n;
  next.k = k;
  next.eta_x.assign(n, 0.0);
  next.eta_j.assign(n * n * n, 0.0);
  next.eta_o.assign(n * n, 0.0);
  next.eta_t1.assign(n * n, 0.0);
  next.eta_t2.assign(n * n, 0.0);

  add_propagated(pi, gammas, bank.eta_x.data(), next.eta_x.data(), n);

  for (std::size_t r = 0; r < n; ++r) {
    const double gx = gammas[r] * bank.eta_x[r];
    double* o = next.eta_o.data() + r * n;
    double* t1 = next.eta_t1.data() + r * n;
    double* t2 = next.eta_t2.data() + r * n;
    add_propagated(pi, gammas, bank.eta_o.data() + r * n, o, n);
    add_propagated(pi, gammas, bank.eta_t1.data() + r * n, t1, n);
    add_propagated(pi, gammas, bank.eta_t2.data() + r * n, t2, n);
    for (std::size_t j = 0; j < n; ++j) {
      const double p = pi(j, r) * gx;
      o[j] += p;
      t1[j] += p * y;
      t2[j] += p * y * y;
    }
    for (std::size_t s = 0; s < n; ++s) {
      double* js = next.eta_j.data() + (s * n + r) * n;
      add_propagated(pi, gammas, bank.eta_j.data() + (s * n + r) * n, js, n);
      js[s] += gx * pi(s, r);
    }
  }

  if (!all_finite(next.eta_x)) throw BreakdownError("state filter is not finite", k, y, "eta_x");
  if (!all_finite(next.eta_j) || !all_finite(next.eta_o) || !all_finite(next.eta_t1) ||
      !all_finite(next.eta_t2)) {
    throw BreakdownError("auxiliary filter is not finite", k, y, "eta_aux");
  }
  if (!(next.mass() > 0.0)) throw BreakdownError("state filter lost all mass", k, y, "<1,eta_x>");
  return next;
}

FilterEstimates normalize(const FilterBank& bank) {
  const double z = bank.mass();
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw BreakdownError("state filter has no usable mass", bank.k, 0.0, "<1,eta_x>");
  }
  const std::size_t n = bank.n;
  FilterEstimates e;
  e.state.resize(n);
  for (std::size_t i = 0; i < n; ++i) e.state[i] = bank.eta_x[i] / z;
  e.jumps = Matrix(n, n);
  e.occupation.assign(n, 0.0);
  e.aux1.assign(n, 0.0);
  e.aux2.assign(n, 0.0);
  auto total = [](std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); };
  for (std::size_t r = 0; r < n; ++r) {
    e.occupation[r] = total(bank.occupation(r)) / z;
    e.aux1[r] = total(bank.aux1(r)) / z;
    e.aux2[r] = total(bank.aux2(r)) / z;
    for (std::size_t s = 0; s < n; ++s) e.jumps(s, r) = total(bank.jump(s, r)) / z;
  }
  return e;
}

FilterBank rescale(const FilterBank& bank) {
  const double z = bank.mass();
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw BreakdownError("state filter has no usable mass", bank.k, 0.0, "<1,eta_x>");
  }
  FilterBank b = bank;
  const double inv = 1.0 / z;
  for (auto* v : {&b.eta_x, &b.eta_j, &b.eta_o, &b.eta_t1, &b.eta_t2}) {
    for (double& x : *v) x *= inv;
  }
  return b;
}

FilterEstimates brute_force_oracle(const RegimeModel& model, const StateDistribution& x0,
                                   std::span<const double> ys, const GammaFn& gammas_fn) {
  const std::size_t n = model.n_states();
  const std::size_t k = ys.size();
  if (x0.size() != n) throw InvalidArgument("brute_force_oracle: x0 has wrong size");
  double paths_k = 1.0;
  for (std::size_t l = 0; l < k; ++l) paths_k *= static_cast<double>(n);
  if (paths_k > 1e6) throw InvalidArgument("brute_force_oracle: instance too large");

  std::vector<std::vector<double>> gam(k);
  for (std::size_t l = 0; l < k; ++l) {
    gam[l] = gammas_fn(ys[l]);
    if (gam[l].size() != n) throw InvalidArgument("brute_force_oracle: gammas has wrong size");
  }

  const std::size_t n_paths = static_cast<std::size_t>(paths_k) * n;
  std::vector<std::size_t> path(k + 1, 0);
  FilterEstimates e;
  e.state.assign(n, 0.0);
  e.jumps = Matrix(n, n);
  e.occupation.assign(n, 0.0);
  e.aux1.assign(n, 0.0);
  e.aux2.assign(n, 0.0);
  double z = 0.0;

  for (std::size_t p = 0; p < n_paths; ++p) {
    std::size_t code = p;
    for (std::size_t l = 0; l <= k; ++l) {
      path[l] = code % n;
      code /= n;
    }
    double w = x0[path[0]];
    for (std::size_t l = 1; l <= k && w != 0.0; ++l) {
      w *= model.transition(path[l], path[l - 1]) * gam[l - 1][path[l - 1]];
    }
    if (w == 0.0) continue;
    z += w;
    e.state[path[k]] += w;
    for (std::size_t l = 1; l <= k; ++l) {
      const std::size_t r = path[l - 1];
      const double y = ys[l - 1];
      e.jumps(path[l], r) += w;
      e.occupation[r] += w;
      e.aux1[r] += w * y;
      e.aux2[r] += w * y * y;
    }
  }
  if (!(z > 0.0)) throw BreakdownError("every path has zero weight", k, 0.0, "path weight");
  for (std::size_t i = 0; i < n; ++i) {
    e.state[i] /= z;
    e.occupation[i] /= z;
    e.aux1[i] /= z;
    e.aux2[i] /= z;
    for (std::size_t s = 0; s < n; ++s) e.jumps(s, i) /= z;
  }
  return e;
}

}  // namespace rhmm
