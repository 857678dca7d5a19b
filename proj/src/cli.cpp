#include "torusmix/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "torusmix/diagnostics.hpp"
#include "torusmix/io.hpp"
#include "torusmix/sampling.hpp"
#include "torusmix/summaries.hpp"

namespace torusmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kFitKeys = {
    "model",          "ncomp",        "n-iter",          "burnin-prop",   "thin",
    "n-chains",       "method",       "perm-sampling",   "cov-restrict",  "unimodal-component",
    "int-displ",      "n-qrnd",       "norm-var",        "pmix-alpha",    "epsilon-init",
    "L",              "epsilon-jitter", "propscale-init", "tune-interval", "autotune",
    "keep-allocations"};

const std::set<std::string> kBoolKeys = {"perm-sampling", "unimodal-component", "autotune", "keep-allocations",
                                         "degrees",       "relabel",            "prev-par", "use-best-chain"};

const std::set<std::string> kStringKeys = {"input", "out",   "params",    "fit",       "fit-a", "fit-b",
                                           "model", "method", "cov-restrict", "crit", "estimator", "config"};

std::string as_str(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("'" + key + "' expects a string");
  return v.get<std::string>();
}

double as_num(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      std::size_t pos = 0;
      const auto s = v.get<std::string>();
      const double x = std::stod(s, &pos);
      if (pos == s.size()) return x;
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("'" + key + "' expects a number");
}

long long as_int(const json& v, const std::string& key) {
  const double x = as_num(v, key);
  if (x != std::floor(x) || std::abs(x) > 9.0e15) throw ConfigError("'" + key + "' expects an integer");
  return static_cast<long long>(x);
}

bool as_flag(const json& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
  }
  throw ConfigError("'" + key + "' expects true or false");
}

json geweke_json(const FitResult& fit, const RunConfig& rc) {
  try {
    const auto r = geweke_report(fit, rc.frac1, rc.frac2);
    json entries = json::array();
    for (const auto& e : r.entries)
      entries.push_back({{"parameter", e.parameter},
                         {"component", e.component},
                         {"chain", e.chain_id},
                         {"z", std::isfinite(e.z) ? json(e.z) : json(nullptr)}});
    return {{"frac1", r.frac1}, {"frac2", r.frac2}, {"entries", entries}};
  } catch (const DomainError& e) {
    return {{"frac1", rc.frac1}, {"frac2", rc.frac2}, {"error", e.what()}};
  }
}

json acceptance_json(const FitResult& fit) {
  json a = json::array();
  for (const auto& r : acceptance_summary(fit)) {
    json rates = json::array();
    for (double x : r.rate) rates.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    a.push_back({{"chain", r.chain_id}, {"rates", rates}});
  }
  return a;
}

MixtureState load_state(const RunConfig& rc, ModelKind& kind, FitConfig& cfg) {
  if (!rc.params.empty() && !rc.fit_dir.empty()) throw ConfigError("give either --params or --fit, not both");
  if (!rc.params.empty()) {
    const auto s = state_from_json(read_json(rc.params), kind);
    cfg.model = kind;
    return s;
  }
  if (!rc.fit_dir.empty()) {
    const auto fit = load_fit(rc.fit_dir);
    kind = fit.config.model;
    cfg = fit.config;
    return pointest(fit, rc.estimator);
  }
  throw ConfigError("a mixture is required: --params file.json or --fit directory");
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ConfigError("missing required option --" + flag);
}

AngleData read_input(const RunConfig& rc, std::ostream& err) {
  require(rc.input, "input");
  std::vector<std::string> warnings;
  auto data = read_angle_csv(rc.input, rc.degrees, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << "\n";
  return data;
}

void cmd_fit(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  require(rc.out, "out");
  const auto data = read_input(rc, err);
  FitResult fit = fit_angmix(rc.fit, data);
  if (rc.relabel && fit.ncomp() > 1) fit = fix_label(fit);
  for (const auto& w : fit.warnings) err << "warning: " << w << "\n";
  write_fit_outputs(rc.out, fit, rc);
  out << "wrote " << rc.out << "\n";
}

void cmd_fit_incremental(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  require(rc.out, "out");
  const auto data = read_input(rc, err);
  const auto res = fit_incremental(rc.fit, data, rc.incremental);
  FitResult best = res.fit_best;
  if (rc.relabel && best.ncomp() > 1) best = fix_label(best);
  write_fit_outputs(rc.out, best, rc);
  std::string table = "ncomp,criterion,value,deviance,p_eff,max_loglik\n";
  for (std::size_t i = 0; i < res.crit_all.size(); ++i) {
    const auto& c = res.crit_all[i];
    const bool elpd = c.kind == CritKind::WAIC || c.kind == CritKind::LOOIC;
    table += std::to_string(res.ncomp_all[i]) + "," + std::string(to_string(c.kind)) + "," + format_double(c.value) +
             "," + format_double(elpd ? -2.0 * c.value : c.value) + "," + format_double(c.p_eff) + "," +
             format_double(res.maxllik_all[i]) + "\n";
  }
  {
    std::ofstream f(fs::path(rc.out) / "crit_table.csv", std::ios::binary);
    if (!f) throw DataError("cannot write crit_table.csv");
    f << table;
  }
  json summary = read_json(fs::path(rc.out) / "summary.json");
  summary["incremental"] = {{"criterion", std::string(to_string(rc.incremental.crit))},
                            {"ncomp_best", res.ncomp_best},
                            {"converged", res.converged},
                            {"ncomp_all", res.ncomp_all},
                            {"maxllik_all", res.maxllik_all}};
  write_json(fs::path(rc.out) / "summary.json", summary);
  if (!res.converged) err << "warning: max-ncomp reached before the criterion stopped improving\n";
  out << "best ncomp " << res.ncomp_best << "; wrote " << rc.out << "\n";
}

void cmd_density_grid(const RunConfig& rc, std::ostream& out) {
  require(rc.out, "out");
  ModelKind kind = ModelKind::VM;
  FitConfig cfg = rc.fit;
  const auto state = load_state(rc, kind, cfg);
  const std::string csv = density_grid_csv(kind, state, rc.resolution, cfg);
  std::ofstream f(rc.out, std::ios::binary);
  if (!f) throw DataError("cannot write '" + rc.out + "'");
  f << csv;
  out << "wrote " << rc.out << "\n";
}

void cmd_sample(const RunConfig& rc, std::ostream& out) {
  require(rc.out, "out");
  if (rc.n < 0) throw ConfigError("--n must be non-negative");
  ModelKind kind = ModelKind::VM;
  FitConfig cfg = rc.fit;
  const auto state = load_state(rc, kind, cfg);
  RngStream rng(rc.fit.seed, 0);
  const auto draw = rmix(static_cast<std::size_t>(rc.n), kind, state, rng);
  std::string s = data_dim(kind) == 1 ? "psi,component\n" : "psi1,psi2,component\n";
  for (std::size_t i = 0; i < draw.data.size(); ++i) {
    const auto row = draw.data[i];
    s += format_double(row[0]);
    if (row.size() == 2) s += "," + format_double(row[1]);
    s += "," + std::to_string(draw.labels[i] + 1) + "\n";
  }
  std::ofstream f(rc.out, std::ios::binary);
  if (!f) throw DataError("cannot write '" + rc.out + "'");
  f << s;
  out << "wrote " << rc.out << "\n";
}

void cmd_summarize(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const auto data = read_input(rc, err);
  const json j = summarize_data(data);
  if (rc.out.empty())
    out << j.dump(2) << "\n";
  else
    write_json(rc.out, j);
}

void cmd_fix_label(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  require(rc.fit_dir, "fit");
  require(rc.out, "out");
  const auto fit = fix_label(load_fit(rc.fit_dir));
  for (const auto& w : fit.warnings) err << "warning: " << w << "\n";
  write_fit_outputs(rc.out, fit, rc);
  out << "wrote " << rc.out << "\n";
}

void cmd_compare(const RunConfig& rc, std::ostream& out) {
  require(rc.fit_a, "fit-a");
  require(rc.fit_b, "fit-b");
  const auto kind = rc.incremental.crit;
  if (kind != CritKind::WAIC && kind != CritKind::LOOIC) throw ConfigError("compare needs --crit WAIC or LOOIC");
  const auto a = load_fit(rc.fit_a), b = load_fit(rc.fit_b);
  if (a.data.size() != b.data.size() || a.data.values() != b.data.values())
    throw DataError("the two fits were made on different data");
  const auto ca = criterion(a, kind), cb = criterion(b, kind);
  const auto r = elpd_compare(ca, cb);
  const json j{{"criterion", std::string(to_string(kind))},
               {"elpd_a", ca.elpd},
               {"elpd_b", cb.elpd},
               {"deviance_a", -2.0 * ca.elpd},
               {"deviance_b", -2.0 * cb.elpd},
               {"p_eff_a", ca.p_eff},
               {"p_eff_b", cb.p_eff},
               {"elpd_diff", r.elpd_diff},
               {"se_diff", r.se_diff},
               {"z", r.z}};
  if (rc.out.empty())
    out << j.dump(2) << "\n";
  else
    write_json(rc.out, j);
}

struct Command {
  std::string name;
  std::string help;
  std::vector<std::string> keys;
};

std::vector<Command> commands() {
  std::vector<std::string> fit_keys = kFitKeys;
  for (const char* k : {"input", "out", "degrees", "relabel", "estimator", "frac1", "frac2"}) fit_keys.push_back(k);
  auto inc_keys = fit_keys;
  for (const char* k : {"crit", "start-ncomp", "max-ncomp", "alpha", "prev-par", "use-best-chain"}) inc_keys.push_back(k);
  return {
      {"fit", "Fit a mixture by MCMC", fit_keys},
      {"fit-incremental", "Fit mixtures with increasing numbers of components", inc_keys},
      {"density-grid", "Evaluate a mixture density on a lattice",
       {"model", "params", "fit", "estimator", "resolution", "out", "int-displ", "n-qrnd"}},
      {"sample", "Draw from a mixture", {"params", "fit", "estimator", "n", "out"}},
      {"summarize", "Circular summary statistics of a data file", {"input", "degrees", "out"}},
      {"fix-label", "Relabel the draws of a saved fit", {"fit", "out", "estimator", "frac1", "frac2"}},
      {"compare", "Compare two saved fits by elpd", {"fit-a", "fit-b", "crit", "out"}},
  };
}

json cli_value(const std::string& key, const std::string& raw) {
  if (kStringKeys.count(key)) return json(raw);
  try {
    return json::parse(raw);
  } catch (const json::parse_error&) {
    return json(raw);
  }
}

}  // namespace

void apply_setting(RunConfig& rc, const std::string& key_in, const json& v) {
  std::string key = key_in;
  std::replace(key.begin(), key.end(), '_', '-');
  if (apply_fit_setting(rc.fit, key, v)) return;
  if (key == "input") rc.input = as_str(v, key);
  else if (key == "out") rc.out = as_str(v, key);
  else if (key == "degrees") rc.degrees = as_flag(v, key);
  else if (key == "relabel") rc.relabel = as_flag(v, key);
  else if (key == "estimator") rc.estimator = parse_reducer(as_str(v, key));
  else if (key == "frac1") rc.frac1 = as_num(v, key);
  else if (key == "frac2") rc.frac2 = as_num(v, key);
  else if (key == "crit") rc.incremental.crit = parse_crit_kind(as_str(v, key));
  else if (key == "start-ncomp") rc.incremental.start_ncomp = static_cast<int>(as_int(v, key));
  else if (key == "max-ncomp") rc.incremental.max_ncomp = static_cast<int>(as_int(v, key));
  else if (key == "alpha") rc.incremental.alpha = as_num(v, key);
  else if (key == "prev-par") rc.incremental.prev_par = as_flag(v, key);
  else if (key == "use-best-chain") rc.incremental.use_best_chain = as_flag(v, key);
  else if (key == "resolution") rc.resolution = static_cast<int>(as_int(v, key));
  else if (key == "params") rc.params = as_str(v, key);
  else if (key == "fit") rc.fit_dir = as_str(v, key);
  else if (key == "fit-a") rc.fit_a = as_str(v, key);
  else if (key == "fit-b") rc.fit_b = as_str(v, key);
  else if (key == "n") rc.n = as_int(v, key);
  else throw ConfigError("unknown setting '" + key_in + "'");
}

json fit_summary(const FitResult& fit, const RunConfig& rc) {
  const auto kind = fit.config.model;
  json draws = json::array();
  for (const auto& ch : fit.chains) draws.push_back(ch.draws.size());
  json ci = json::array();
  for (const auto& c : credible_interval(fit, 0.05))
    ci.push_back({{"parameter", c.parameter}, {"component", c.component}, {"lower", c.lower}, {"upper", c.upper}});
  return {{"model", std::string(to_string(kind))},
          {"ncomp", fit.config.ncomp},
          {"n_data", fit.data.size()},
          {"n_chains", fit.chains.size()},
          {"draws_per_chain", draws},
          {"pointest",
           {{"mean", state_to_json(kind, pointest(fit, Reducer::MEAN))},
            {"mode", state_to_json(kind, pointest(fit, Reducer::MODE))}}},
          {"credible_level", 0.95},
          {"credible_intervals", ci},
          {"acceptance", acceptance_json(fit)},
          {"geweke", geweke_json(fit, rc)},
          {"max_loglik", max_loglik(fit)},
          {"latent_allocation", latent_allocation(fit, Reducer::MODE)},
          {"warnings", fit.warnings}};
}

json fit_diagnostics(const FitResult& fit, const RunConfig& rc) {
  json chains = json::array();
  for (const auto& ch : fit.chains) {
    json events = json::array();
    for (const auto& e : ch.tuning)
      events.push_back({{"iteration", e.iteration}, {"accept_rate", e.accept_rate}, {"step", e.step}});
    chains.push_back({{"chain", ch.chain_id},
                      {"post_burnin_accepted", ch.accepted},
                      {"post_burnin_proposed", ch.proposed},
                      {"divergent", ch.divergent},
                      {"tuning", events}});
  }
  return {{"geweke", geweke_json(fit, rc)},
          {"acceptance", acceptance_json(fit)},
          {"chains", chains},
          {"warnings", fit.warnings}};
}

void write_fit_outputs(const fs::path& dir, const FitResult& fit, const RunConfig& rc) {
  save_fit(dir, fit);
  write_json(dir / "summary.json", fit_summary(fit, rc));
  write_json(dir / "diagnostics.json", fit_diagnostics(fit, rc));
}

json summarize_data(const AngleData& data) {
  json j{{"n", data.size()}, {"dim", data.dim()}};
  json errors = json::object();
  json means = json::array(), vars = json::array();
  for (int c = 0; c < data.dim(); ++c) {
    const auto col = data.column(c);
    const std::string tag = "[" + std::to_string(c + 1) + "]";
    try {
      means.push_back(circ_mean(col));
    } catch (const std::exception& e) {
      means.push_back(nullptr);
      errors["circ_mean" + tag] = e.what();
    }
    try {
      vars.push_back(circ_var(col));
    } catch (const std::exception& e) {
      vars.push_back(nullptr);
      errors["circ_var" + tag] = e.what();
    }
  }
  j["circ_mean"] = means;
  j["circ_var"] = vars;
  if (data.dim() == 2) {
    const auto a = data.column(0), b = data.column(1);
    try {
      j["rho_js"] = circ_corr_js(a, b);
    } catch (const std::exception& e) {
      j["rho_js"] = nullptr;
      errors["rho_js"] = e.what();
    }
    try {
      j["rho_fl"] = circ_corr_fl(a, b);
    } catch (const std::exception& e) {
      j["rho_fl"] = nullptr;
      errors["rho_fl"] = e.what();
    }
  }
  if (!errors.empty()) j["errors"] = errors;
  return j;
}

std::string density_grid_csv(ModelKind kind, const MixtureState& state, int resolution, const FitConfig& cfg) {
  if (resolution < 2) throw ConfigError("resolution must be at least 2");
  validate_state(state);
  for (const auto& c : state.comps) validate_params(kind, c);
  const MixtureDensity mix(kind, state, DispConfig{cfg.int_displ}, QrndConfig{cfg.n_qrnd});
  const double h = kTwoPi / resolution;
  std::string s;
  if (data_dim(kind) == 1) {
    s = "psi,density\n";
    for (int i = 0; i < resolution; ++i) {
      const double x = i * h;
      s += format_double(x) + "," + format_double(std::exp(mix.logpdf({&x, 1}))) + "\n";
    }
    return s;
  }
  s = "psi1,psi2,density\n";
  for (int i = 0; i < resolution; ++i)
    for (int k = 0; k < resolution; ++k) {
      const double p[2] = {i * h, k * h};
      s += format_double(p[0]) + "," + format_double(p[1]) + "," + format_double(std::exp(mix.logpdf(p))) + "\n";
    }
  return s;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian mixtures of univariate and bivariate angular distributions", "torusmix"};
  app.require_subcommand(1);
  std::string global_seed, global_config;
  app.add_option("--seed", global_seed, "Random seed for every command");
  app.add_option("--config", global_config, "JSON file of settings");

  const auto cmds = commands();
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    subs[c.name] = sub;
    auto& vals = values[c.name];
    std::vector<std::string> keys = c.keys;
    keys.push_back("seed");
    keys.push_back("config");
    for (const auto& k : keys) {
      if (kBoolKeys.count(k))
        sub->add_flag("--" + k + "{true},--no-" + k + "{false}", vals[k]);
      else
        sub->add_option("--" + k, vals[k]);
    }
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const Command* cmd = nullptr;
    for (const auto& c : cmds)
      if (subs[c.name]->parsed()) cmd = &c;
    auto* sub = subs[cmd->name];
    const auto& vals = values[cmd->name];
    RunConfig rc;
    std::string config_path = sub->count("--config") ? vals.at("config") : global_config;
    if (!config_path.empty()) {
      const json file = read_json(config_path);
      if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
      for (const auto& [key, value] : file.items()) apply_setting(rc, key, value);
    }
    if (!global_seed.empty()) apply_setting(rc, "seed", cli_value("seed", global_seed));
    std::vector<std::string> keys = cmd->keys;
    keys.push_back("seed");
    for (const auto& k : keys) {
      const std::string flag = "--" + k;
      if (sub->count(flag) > 0) apply_setting(rc, k, cli_value(k, vals.at(k)));
    }

    if (cmd->name == "fit") cmd_fit(rc, out, err);
    else if (cmd->name == "fit-incremental") cmd_fit_incremental(rc, out, err);
    else if (cmd->name == "density-grid") cmd_density_grid(rc, out);
    else if (cmd->name == "sample") cmd_sample(rc, out);
    else if (cmd->name == "summarize") cmd_summarize(rc, out, err);
    else if (cmd->name == "fix-label") cmd_fix_label(rc, out, err);
    else if (cmd->name == "compare") cmd_compare(rc, out);
    return kExitOk;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const DegenerateError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace torusmix
