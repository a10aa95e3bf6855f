#include "rhmm/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "rhmm/error.hpp"
#include "rhmm/io.hpp"
#include "rhmm/measure_change.hpp"
#include "rhmm/rng.hpp"
#include "rhmm/robust_core.hpp"
#include "rhmm/simulator.hpp"
#include "rhmm/so_optimal.hpp"

namespace rhmm::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using io::format_double;

namespace {

constexpr const char* tool_version = "1.0.0";

InitMethod parse_init(const std::string& s) {
  if (s == "auto") return InitMethod::automatic;
  if (s == "classical") return InitMethod::classical;
  if (s == "robust") return InitMethod::robust;
  throw InvalidArgument("--init must be auto, classical or robust, got '" + s + "'");
}

Estimator parse_estimator(const std::string& s) {
  if (s == "auto") return Estimator::automatic;
  if (s == "mle") return Estimator::mle;
  if (s == "mbre") return Estimator::mbre;
  throw InvalidArgument("--estimator must be auto, mle or mbre, got '" + s + "'");
}

ReferenceChoice parse_reference(const std::string& s) {
  if (s == "auto") return ReferenceChoice::automatic;
  if (s == "standard") return ReferenceChoice::standard;
  if (s == "sd") return ReferenceChoice::sd;
  if (s == "mad") return ReferenceChoice::mad;
  throw InvalidArgument("--reference must be auto, standard, sd or mad, got '" + s + "'");
}

Redistribution parse_redistribution(const std::string& s) {
  if (s == "random") return Redistribution::random;
  if (s == "posterior") return Redistribution::posterior;
  throw InvalidArgument("--redistribution must be random or posterior, got '" + s + "'");
}

std::string to_string(Redistribution r) { return r == Redistribution::random ? "random" : "posterior"; }

TransitionStart parse_pi_start(const std::string& s) {
  if (s == "frequencies") return TransitionStart::frequencies;
  if (s == "transitions") return TransitionStart::transitions;
  throw InvalidArgument("--pi-start must be frequencies or transitions, got '" + s + "'");
}

std::string to_string(TransitionStart t) {
  return t == TransitionStart::frequencies ? "frequencies" : "transitions";
}

json config_json(const RunConfig& c) {
  const BatchConfig& b = c.batch;
  json j;
  j["subcommand"] = c.subcommand;
  j["input"] = c.input ? json(c.input->generic_string()) : json(nullptr);
  j["states"] = c.states;
  j["batch_len"] = b.batch_len;
  j["init_len"] = b.first_batch_len();
  j["mode"] = to_string(b.mode);
  j["alpha"] = b.alpha;
  j["mad_floor"] = b.mad_floor;
  j["seed"] = b.seed;
  j["init"] = rhmm::to_string(b.init);
  j["estimator"] = rhmm::to_string(b.estimator);
  j["reference"] = rhmm::to_string(b.reference);
  j["redistribution"] = to_string(b.redistribution);
  j["pi_start"] = to_string(b.pi_start);
  j["recalibrate"] = b.recalibrate;
  j["mc_size"] = b.mc_size;
  j["consistency_reps"] = b.consistency_reps;
  j["outlier_q"] = b.outlier_q;
  j["freeze_eps"] = b.freeze_eps;
  j["gmm_restarts"] = b.gmm.restarts;
  j["contamination"] = c.contamination;
  j["horizon"] = c.horizon;
  j["drift"] = c.drift;
  j["vol"] = c.vol;
  j["transition"] = c.transition;
  j["rate"] = c.rate;
  j["ideal_sd"] = c.ideal_sd;
  j["draws"] = c.draws;
  j["figure_modes"] = c.figure_modes;
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  BatchConfig& b = c.batch;
  c.subcommand = j.at("subcommand").get<std::string>();
  if (!j.at("input").is_null()) c.input = fs::path(j.at("input").get<std::string>());
  c.states = j.at("states").get<std::size_t>();
  b.batch_len = j.at("batch_len").get<std::size_t>();
  b.init_len = j.at("init_len").get<std::size_t>();
  b.mode = parse_mode(j.at("mode").get<std::string>());
  b.alpha = j.at("alpha").get<double>();
  b.mad_floor = j.at("mad_floor").get<double>();
  b.seed = j.at("seed").get<std::uint64_t>();
  b.init = parse_init(j.at("init").get<std::string>());
  b.estimator = parse_estimator(j.at("estimator").get<std::string>());
  b.reference = parse_reference(j.at("reference").get<std::string>());
  b.redistribution = parse_redistribution(j.at("redistribution").get<std::string>());
  b.pi_start = parse_pi_start(j.at("pi_start").get<std::string>());
  b.recalibrate = j.at("recalibrate").get<bool>();
  b.mc_size = j.at("mc_size").get<std::size_t>();
  b.consistency_reps = j.at("consistency_reps").get<std::size_t>();
  b.outlier_q = j.at("outlier_q").get<double>();
  b.freeze_eps = j.at("freeze_eps").get<double>();
  b.gmm.restarts = j.at("gmm_restarts").get<std::size_t>();
  c.contamination = j.at("contamination").get<std::string>();
  c.horizon = j.at("horizon").get<std::size_t>();
  c.drift = j.at("drift").get<std::vector<double>>();
  c.vol = j.at("vol").get<std::vector<double>>();
  c.transition = j.at("transition").get<std::vector<double>>();
  c.rate = j.at("rate").get<double>();
  c.ideal_sd = j.at("ideal_sd").get<double>();
  c.draws = j.at("draws").get<std::size_t>();
  c.figure_modes = j.at("figure_modes").get<std::string>();
  return c;
}

RunConfig load_manifest_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open manifest " + path.string());
  json m;
  try {
    in >> m;
    return config_from_json(m.at("config"));
  } catch (const json::exception& e) {
    throw InvalidArgument("manifest " + path.string() + " is not usable: " + e.what());
  }
}

std::string digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open input file " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char ch;
  while (in.get(ch)) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return "fnv1a64:" + os.str();
}

json model_json(const RegimeModel& m) {
  json j;
  j["drift"] = std::vector<double>(m.drift().begin(), m.drift().end());
  j["vol"] = std::vector<double>(m.vol().begin(), m.vol().end());
  json rows = json::array();
  for (std::size_t r = 0; r < m.n_states(); ++r) {
    std::vector<double> row(m.n_states());
    for (std::size_t c = 0; c < m.n_states(); ++c) row[c] = m.transition(r, c);
    rows.push_back(row);
  }
  j["transition"] = rows;
  return j;
}

json manifest_base(const RunConfig& cfg) {
  json m;
  m["tool"] = "rhmm";
  m["version"] = tool_version;
  m["schema"] = schema_version;
  m["config"] = config_json(cfg);
  if (cfg.input) m["input_digest"] = digest(*cfg.input);
  const MbreConstants k;
  m["constants"] = {{"mbre_A", k.A},
                    {"mbre_a", k.a},
                    {"mbre_b", k.b},
                    {"mad_consistency_quantile", normal_quantile(0.75)},
                    {"mad_consistency_cdf", normal_cdf(0.75)}};
  return m;
}

void write_manifest(const fs::path& dir, json m, const std::vector<std::string>& files) {
  m["outputs"] = files;
  io::write_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::string path_csv(const SimulatedPath& p) {
  std::ostringstream os;
  write_path_csv(os, p);
  return os.str();
}

SimulatedPath demo_path(const RunConfig& cfg, const RegimeModel& model) {
  const SimulatedPath clean =
      simulate_hmm(model, stationary_distribution(model), cfg.horizon, cfg.batch.seed);
  return contaminate(clean, parse_contamination(cfg.contamination, model),
                     derive_seed(cfg.batch.seed, 7));
}

struct Series {
  std::vector<double> values;
  std::vector<bool> outlier_mask;  ///< empty when unknown
};

Series load_series(const RunConfig& cfg) {
  if (cfg.input) {
    const ReturnSeries rs = io::read_returns(*cfg.input);
    return {std::vector<double>(rs.values().begin(), rs.values().end()), {}};
  }
  const SimulatedPath p = demo_path(cfg, simulation_model(cfg));
  return {std::vector<double>(p.observed.values().begin(), p.observed.values().end()),
          p.outlier_mask};
}

json trace_summary(const EstimationTrace& tr) {
  json j;
  j["batches"] = tr.batches.size();
  j["steps"] = tr.steps.size();
  j["flag_threshold"] = tr.flag_threshold;
  if (tr.init) {
    json init = model_json(tr.init->model);
    init["method"] = tr.init->method;
    init["x0"] = std::vector<double>(tr.init->x0.probs().begin(), tr.init->x0.probs().end());
    init["noise_component"] =
        tr.init->noise_component ? json(*tr.init->noise_component + 1) : json(nullptr);
    j["initial"] = init;
  }
  if (!tr.batches.empty()) j["final"] = model_json(tr.final_model());
  if (tr.breakdown) {
    j["breakdown"] = {{"step", tr.breakdown->step},
                      {"y", tr.breakdown->y},
                      {"quantity", tr.breakdown->quantity},
                      {"message", tr.breakdown->message}};
  } else {
    j["breakdown"] = nullptr;
  }
  return j;
}

std::vector<double> split_numbers(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::logic_error&) {
      throw InvalidArgument(flag + " holds '" + cell + "', not a number");
    }
  }
  return out;
}

}  // namespace

fs::path default_out_dir() {
  if (const char* env = std::getenv(out_dir_env); env != nullptr && *env != '\0') return fs::path(env);
  return fs::path("rhmm_out");
}

RegimeModel simulation_model(const RunConfig& cfg) {
  if (cfg.drift.empty() && cfg.vol.empty() && cfg.transition.empty()) return demo_model();
  const std::size_t n = cfg.drift.size();
  if (cfg.vol.size() != n || cfg.transition.size() != n * n) {
    throw InvalidArgument("--drift, --vol and --transition must describe the same number of states");
  }
  Matrix pi(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) pi(r, c) = cfg.transition[r * n + c];
  }
  return RegimeModel(std::move(pi), cfg.drift, cfg.vol);
}

RunConfig parse_args(int argc, const char* const* argv) {
  CLI::App app{"Filter-based EM for Gaussian regime-switching returns, classical and robust"};
  app.require_subcommand(1, 1);

  std::string manifest;
  std::string input, out, mode = "classical", contamination = "none", init = "auto",
                      estimator = "auto", reference = "auto", redistribution = "random",
                      pi_start = "frequencies", drift, vol, transition, figure_modes = "both";
  std::size_t states = 2, batch_len = 10, init_len = 0, horizon = demo_horizon, mc_size = 10000,
              draws = 1000000, restarts = 10;
  double alpha = 0.95, outlier_q = 0.01, rate = 0.1, ideal_sd = 1.0;
  std::uint64_t seed = 1;

  std::vector<std::function<void(RunConfig&)>> apply;
  auto bind = [&](CLI::App* sub, CLI::Option* opt, std::function<void(RunConfig&)> f) {
    (void)sub;
    apply.push_back([opt, f](RunConfig& c) {
      if (opt->count() > 0) f(c);
    });
  };

  auto common = [&](CLI::App* sub) {
    sub->add_option("--from-manifest", manifest, "Reuse the configuration recorded in a manifest");
    bind(sub, sub->add_option("--out", out, "Output directory (default $RHMM_OUT_DIR or rhmm_out)"),
         [&](RunConfig& c) { c.out = out; });
    bind(sub, sub->add_option("--seed", seed, "Master seed"), [&](RunConfig& c) { c.batch.seed = seed; });
  };
  auto model_flags = [&](CLI::App* sub) {
    bind(sub, sub->add_option("--horizon", horizon, "Length of the simulated series"),
         [&](RunConfig& c) { c.horizon = horizon; });
    bind(sub, sub->add_option("--contamination", contamination,
                              "none | considerable | severe | fixed:POS=VALUE,..."),
         [&](RunConfig& c) { c.contamination = contamination; });
    bind(sub, sub->add_option("--drift", drift, "Comma-separated state drifts"),
         [&](RunConfig& c) { c.drift = split_numbers(drift, "--drift"); });
    bind(sub, sub->add_option("--vol", vol, "Comma-separated state volatilities"),
         [&](RunConfig& c) { c.vol = split_numbers(vol, "--vol"); });
    bind(sub, sub->add_option("--transition", transition,
                              "Row-major transition matrix, column j = law of the next state from j"),
         [&](RunConfig& c) { c.transition = split_numbers(transition, "--transition"); });
  };
  auto estimation_flags = [&](CLI::App* sub) {
    bind(sub, sub->add_option("--input", input, "CSV with a return, observed or price column"),
         [&](RunConfig& c) { c.input = fs::path(input); });
    bind(sub, sub->add_option("--states", states, "Number of regimes N"),
         [&](RunConfig& c) { c.states = states; });
    bind(sub, sub->add_option("--batch-len", batch_len, "Observations per batch"),
         [&](RunConfig& c) { c.batch.batch_len = batch_len; });
    bind(sub, sub->add_option("--init-len", init_len, "Length of the first batch (0: 3 batches)"),
         [&](RunConfig& c) { c.batch.init_len = init_len; });
    bind(sub, sub->add_option("--alpha", alpha, "Target mean of the clipped likelihood ratio"),
         [&](RunConfig& c) { c.batch.alpha = alpha; });
    bind(sub, sub->add_option("--init", init, "auto | classical | robust"),
         [&](RunConfig& c) { c.batch.init = parse_init(init); });
    bind(sub, sub->add_option("--estimator", estimator, "auto | mle | mbre"),
         [&](RunConfig& c) { c.batch.estimator = parse_estimator(estimator); });
    bind(sub, sub->add_option("--reference", reference, "auto | standard | sd | mad"),
         [&](RunConfig& c) { c.batch.reference = parse_reference(reference); });
    bind(sub, sub->add_option("--redistribution", redistribution, "random | posterior"),
         [&](RunConfig& c) { c.batch.redistribution = parse_redistribution(redistribution); });
    bind(sub, sub->add_option("--pi-start", pi_start, "frequencies | transitions"),
         [&](RunConfig& c) { c.batch.pi_start = parse_pi_start(pi_start); });
    bind(sub, sub->add_flag("--calibrate-once", "Reuse the clipping constants of the first batch"),
         [&](RunConfig& c) { c.batch.recalibrate = false; });
    bind(sub, sub->add_option("--mc-size", mc_size, "Monte-Carlo draws for the clipping calibration"),
         [&](RunConfig& c) { c.batch.mc_size = mc_size; });
    bind(sub, sub->add_option("--outlier-q", outlier_q, "Nominal outlier flag rate"),
         [&](RunConfig& c) { c.batch.outlier_q = outlier_q; });
    bind(sub, sub->add_option("--gmm-restarts", restarts, "Restarts of the mixture fit"),
         [&](RunConfig& c) { c.batch.gmm.restarts = restarts; });
  };

  CLI::App* sim = app.add_subcommand("simulate", "Simulate a regime-switching path");
  common(sim);
  model_flags(sim);

  CLI::App* est = app.add_subcommand("estimate", "Run the batch EM on a series");
  common(est);
  model_flags(est);
  estimation_flags(est);
  bind(est, est->add_option("--mode", mode, "classical | robust"),
       [&](RunConfig& c) { c.batch.mode = parse_mode(mode); });

  CLI::App* ver = app.add_subcommand("verify-theorem", "Check the minimax saddle point by simulation");
  common(ver);
  bind(ver, ver->add_option("--rate", rate, "Contamination radius r"),
       [&](RunConfig& c) { c.rate = rate; });
  bind(ver, ver->add_option("--ideal-sd", ideal_sd, "Standard deviation of the normal ideal law"),
       [&](RunConfig& c) { c.ideal_sd = ideal_sd; });
  bind(ver, ver->add_option("--draws", draws, "Monte-Carlo draws per risk"),
       [&](RunConfig& c) { c.draws = draws; });

  CLI::App* fig = app.add_subcommand("figures", "Write the tables behind the estimate figures");
  common(fig);
  model_flags(fig);
  estimation_flags(fig);
  bind(fig, fig->add_option("--mode", figure_modes, "classical | robust | both"),
       [&](RunConfig& c) { c.figure_modes = figure_modes; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    throw;
  } catch (const CLI::ParseError& e) {
    throw InvalidArgument(e.what());
  }

  RunConfig cfg;
  if (!manifest.empty()) cfg = load_manifest_config(manifest);
  cfg.subcommand = app.get_subcommands().front()->get_name();
  if (!manifest.empty()) {
    const RunConfig recorded = load_manifest_config(manifest);
    if (recorded.subcommand != cfg.subcommand) {
      throw InvalidArgument("manifest records subcommand '" + recorded.subcommand + "', not '" +
                            cfg.subcommand + "'");
    }
  }
  cfg.out = default_out_dir();
  for (const auto& f : apply) f(cfg);

  if (cfg.input && cfg.contamination != "none") {
    throw InvalidArgument("--contamination applies to simulated series only, not to --input");
  }
  if (cfg.figure_modes != "classical" && cfg.figure_modes != "robust" && cfg.figure_modes != "both") {
    throw InvalidArgument("figures --mode must be classical, robust or both");
  }
  if (cfg.states == 0) throw InvalidArgument("--states must be positive");
  if (cfg.horizon == 0) throw InvalidArgument("--horizon must be positive");
  if (!(cfg.rate > 0.0 && cfg.rate < 1.0)) throw InvalidArgument("--rate must lie in (0, 1)");
  if (!(cfg.ideal_sd > 0.0)) throw InvalidArgument("--ideal-sd must be positive");
  if (cfg.draws < 1000) throw InvalidArgument("--draws must be at least 1000");
  cfg.batch.validate();
  (void)simulation_model(cfg);
  return cfg;
}

std::string batches_csv(const EstimationTrace& tr) {
  const std::size_t n = tr.n_states;
  std::ostringstream os;
  os << "batch,first,last";
  for (std::size_t i = 1; i <= n; ++i) os << ",f_" << i;
  for (std::size_t i = 1; i <= n; ++i) os << ",sigma_" << i;
  for (std::size_t j = 1; j <= n; ++j) {
    for (std::size_t i = 1; i <= n; ++i) os << ",pi_" << j << "_" << i;
  }
  os << ",sigma_bar,clip_b,consistency,mean_sqrt";
  for (std::size_t i = 1; i <= n; ++i) os << ",gain_" << i;
  for (std::size_t i = 1; i <= n; ++i) os << ",noether_" << i;
  for (std::size_t i = 1; i <= n; ++i) os << ",frozen_" << i;
  os << ",flagged,note\n";
  for (const BatchRecord& b : tr.batches) {
    os << b.index << ',' << b.first << ',' << b.last;
    for (double v : b.drift) os << ',' << format_double(v);
    for (double v : b.vol) os << ',' << format_double(v);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) os << ',' << format_double(b.transition(j, i));
    }
    os << ',' << format_double(b.sigma_bar);
    if (b.calibration) {
      os << ',' << format_double(b.calibration->clip_b) << ',' << format_double(b.calibration->consistency)
         << ',' << format_double(b.calibration->mean_sqrt);
    } else {
      os << ",,,";
    }
    for (double v : b.gain) os << ',' << format_double(v);
    for (double v : b.noether) os << ',' << format_double(v);
    for (bool v : b.frozen) os << ',' << (v ? 1 : 0);
    os << ',' << b.flagged << ',' << b.note << '\n';
  }
  return os.str();
}

std::string steps_csv(const EstimationTrace& tr) {
  const std::size_t n = tr.n_states;
  std::ostringstream os;
  os << "t,batch,y,forecast";
  for (std::size_t i = 1; i <= n; ++i) os << ",p_" << i;
  for (std::size_t i = 1; i <= n; ++i) os << ",membership_" << i;
  os << ",score,flagged\n";
  for (const StepRecord& s : tr.steps) {
    os << s.index << ',' << s.batch << ',' << format_double(s.y) << ',' << format_double(s.forecast);
    for (double v : s.filtered) os << ',' << format_double(v);
    for (std::size_t i = 0; i < n; ++i) {
      os << ',' << (i < s.membership.size() ? format_double(s.membership[i]) : std::string());
    }
    os << ',' << format_double(s.score) << ',' << (s.flagged ? 1 : 0) << '\n';
  }
  return os.str();
}

int cmd_simulate(const RunConfig& cfg) {
  const RegimeModel model = simulation_model(cfg);
  const SimulatedPath p = demo_path(cfg, model);
  io::write_file(cfg.out / "path.csv", path_csv(p));
  json m = manifest_base(cfg);
  m["model"] = model_json(model);
  std::vector<std::size_t> planted;
  for (std::size_t k = 0; k < p.outlier_mask.size(); ++k) {
    if (p.outlier_mask[k]) planted.push_back(k + 1);
  }
  m["outlier_positions"] = planted;
  write_manifest(cfg.out, m, {"path.csv"});
  std::cout << "wrote " << p.size() << " observations to " << (cfg.out / "path.csv").string() << "\n";
  return exit_ok;
}

int cmd_estimate(const RunConfig& cfg) {
  const Series s = load_series(cfg);
  const EstimationTrace tr = run(s.values, cfg.states, cfg.batch);
  io::write_file(cfg.out / "batches.csv", batches_csv(tr));
  io::write_file(cfg.out / "steps.csv", steps_csv(tr));
  json m = manifest_base(cfg);
  m["observations"] = s.values.size();
  m["result"] = trace_summary(tr);
  write_manifest(cfg.out, m, {"batches.csv", "steps.csv"});
  if (tr.breakdown) {
    std::cerr << "breakdown at t=" << tr.breakdown->step << " (y=" << format_double(tr.breakdown->y)
              << ", " << tr.breakdown->quantity << "): " << tr.breakdown->message << "\n";
    return exit_breakdown;
  }
  const RegimeModel fm = tr.final_model();
  std::cout << to_string(cfg.batch.mode) << " run over " << s.values.size() << " observations, "
            << tr.batches.size() << " batches\n";
  for (std::size_t i = 0; i < fm.n_states(); ++i) {
    std::cout << "  state " << i + 1 << ": f=" << format_double(fm.drift()[i])
              << " sigma=" << format_double(fm.vol()[i]) << "\n";
  }
  return exit_ok;
}

int cmd_verify_theorem(const RunConfig& cfg) {
  const SoProblem p = make_problem(IdealLaw::normal(0.0, cfg.ideal_sd), cfg.rate);
  const SaddleReport r = verify_saddle_point(p, default_contaminators(p), cfg.draws, cfg.batch.seed);
  json rep;
  rep["rate"] = r.rate;
  rep["rho"] = r.rho;
  rep["residual"] = r.residual;
  rep["backend"] = r.backend;
  rep["saddle_value"] = r.saddle_value;
  rep["uncorrected_value"] = r.uncorrected_value;
  rep["risk_p0"] = {{"mean", r.risk_p0.mean}, {"se", r.risk_p0.se}};
  rep["risk_matches"] = r.risk_matches;
  json alts = json::array();
  for (const auto& c : r.contaminators) {
    alts.push_back({{"name", c.name},
                    {"risk", c.risk.mean},
                    {"se", c.risk.se},
                    {"diff_mean", c.diff_mean},
                    {"diff_se", c.diff_se},
                    {"within", c.within}});
  }
  rep["contaminators"] = alts;
  json recs = json::array();
  for (const auto& c : r.reconstructions) {
    recs.push_back({{"name", c.name}, {"risk", c.risk.mean}, {"se", c.risk.se}, {"worse", c.worse}});
  }
  rep["reconstructions"] = recs;
  rep["draws"] = r.draws;
  rep["seed"] = r.seed;
  io::write_file(cfg.out / "theorem.json", rep.dump(2) + "\n");
  write_manifest(cfg.out, manifest_base(cfg), {"theorem.json"});
  std::cout << "rho=" << format_double(r.rho) << " saddle risk=" << format_double(r.saddle_value)
            << " empirical=" << format_double(r.risk_p0.mean) << " +- " << format_double(r.risk_p0.se)
            << "\n";
  return exit_ok;
}

int cmd_figures(const RunConfig& cfg) {
  std::vector<std::string> scenarios;
  if (cfg.input) {
    scenarios = {"input"};
  } else {
    scenarios = {"none", "considerable", "severe"};
  }
  std::vector<Mode> modes;
  if (cfg.figure_modes != "robust") modes.push_back(Mode::classical);
  if (cfg.figure_modes != "classical") modes.push_back(Mode::robust);

  std::vector<std::string> files;
  json runs = json::array();
  for (const std::string& scenario : scenarios) {
    RunConfig sc = cfg;
    if (!cfg.input) sc.contamination = scenario;
    const Series s = load_series(sc);
    for (Mode mode : modes) {
      RunConfig rc = sc;
      rc.batch.mode = mode;
      const EstimationTrace tr = run(s.values, rc.states, rc.batch);
      const std::string label = scenario == "none" ? "clean" : scenario;
      const std::string stem = label + "-" + to_string(mode);
      const std::size_t shown = tr.steps.size();

      std::ostringstream ret;
      ret << "t,y,planted,flagged\n";
      for (std::size_t k = 0; k < shown; ++k) {
        const bool planted = !s.outlier_mask.empty() && s.outlier_mask[k];
        ret << k + 1 << ',' << format_double(s.values[k]) << ',' << (planted ? 1 : 0) << ','
            << (tr.steps[k].flagged ? 1 : 0) << '\n';
      }
      std::ostringstream est;
      est << "t";
      for (std::size_t i = 1; i <= tr.n_states; ++i) est << ",f_" << i;
      for (std::size_t i = 1; i <= tr.n_states; ++i) est << ",sigma_" << i;
      est << '\n';
      for (const BatchRecord& b : tr.batches) {
        est << b.last;
        for (double v : b.drift) est << ',' << format_double(v);
        for (double v : b.vol) est << ',' << format_double(v);
        est << '\n';
      }
      std::ostringstream fc;
      fc << "t,y,forecast\n";
      for (const StepRecord& st : tr.steps) {
        fc << st.index << ',' << format_double(st.y) << ',' << format_double(st.forecast) << '\n';
      }
      const std::vector<std::pair<std::string, std::string>> panels = {
          {stem + "-returns.csv", ret.str()},
          {stem + "-estimates.csv", est.str()},
          {stem + "-forecast.csv", fc.str()}};
      for (const auto& [name, text] : panels) {
        io::write_file(cfg.out / name, text);
        files.push_back(name);
      }
      json r = {{"scenario", scenario}, {"mode", to_string(mode)}, {"steps", shown}};
      r["breakdown_step"] = tr.breakdown ? json(tr.breakdown->step) : json(nullptr);
      runs.push_back(r);
    }
  }
  json m = manifest_base(cfg);
  m["panels"] = runs;
  write_manifest(cfg.out, m, files);
  std::cout << "wrote " << files.size() << " panel tables to " << cfg.out.string() << "\n";
  return exit_ok;
}

int main(int argc, const char* const* argv) {
  RunConfig cfg;
  try {
    cfg = parse_args(argc, argv);
  } catch (const CLI::CallForHelp&) {
    return exit_ok;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_usage;
  }
  try {
    if (cfg.subcommand == "simulate") return cmd_simulate(cfg);
    if (cfg.subcommand == "estimate") return cmd_estimate(cfg);
    if (cfg.subcommand == "verify-theorem") return cmd_verify_theorem(cfg);
    if (cfg.subcommand == "figures") return cmd_figures(cfg);
    std::cerr << "error: unknown subcommand " << cfg.subcommand << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_error;
  }
}

}  // namespace rhmm::cli
