#include "torusmix/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "torusmix/postprocess.hpp"

namespace torusmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

double as_number(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    double x = 0.0;
    if (parse_number(v.get<std::string>(), x)) return x;
  }
  throw ConfigError("'" + key + "' expects a number");
}

long long as_integer(const json& v, const std::string& key) {
  const double x = as_number(v, key);
  if (x != std::floor(x) || std::abs(x) > 9.0e15) throw ConfigError("'" + key + "' expects an integer");
  return static_cast<long long>(x);
}

bool as_bool(const json& v, const std::string& key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
  }
  if (v.is_number_integer()) return v.get<long long>() != 0;
  throw ConfigError("'" + key + "' expects true or false");
}

std::string as_string(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  throw ConfigError("'" + key + "' expects a string");
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

AngleData parse_angle_csv(std::string_view text, bool degrees, std::vector<std::string>* warnings) {
  std::vector<double> values;
  int dim = 0;
  std::size_t line_no = 0, reduced = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find('\n', start);
    const auto line = text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    start = pos == std::string_view::npos ? text.size() + 1 : pos + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    std::vector<double> row;
    bool numeric = true;
    for (const auto& f : fields) {
      double x = 0.0;
      if (!parse_number(f, x)) {
        numeric = false;
        break;
      }
      row.push_back(x);
    }
    if (!numeric) {
      if (values.empty() && dim == 0) {
        dim = -static_cast<int>(fields.size());  // header seen
        continue;
      }
      throw DataError("non-numeric value on line " + std::to_string(line_no));
    }
    const int d = static_cast<int>(row.size());
    if (d != 1 && d != 2) throw DataError("expected 1 or 2 columns on line " + std::to_string(line_no));
    if (dim < 0 && -dim != d) throw DataError("row width differs from the header on line " + std::to_string(line_no));
    if (dim > 0 && dim != d) throw DataError("inconsistent column count on line " + std::to_string(line_no));
    dim = d;
    for (double x : row) {
      if (!std::isfinite(x)) throw DataError("non-finite value on line " + std::to_string(line_no));
      if (degrees) x *= std::numbers::pi / 180.0;
      if (x < 0.0 || x >= kTwoPi) {
        ++reduced;
        x = wrap_angle(x);
      }
      values.push_back(x);
    }
  }
  if (dim <= 0 || values.empty()) throw DataError("no data rows");
  if (reduced > 0 && warnings)
    warnings->push_back(std::to_string(reduced) + " value(s) outside [0, 2pi) were reduced modulo 2pi");
  return AngleData(dim, std::move(values));
}

AngleData read_angle_csv(const fs::path& path, bool degrees, std::vector<std::string>* warnings) {
  return parse_angle_csv(read_text(path), degrees, warnings);
}

void write_angle_csv(const fs::path& path, const AngleData& data) {
  std::string s = data.dim() == 1 ? "psi\n" : "psi1,psi2\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data[i];
    s += format_double(row[0]);
    if (data.dim() == 2) s += "," + format_double(row[1]);
    s += "\n";
  }
  write_text(path, s);
}

std::string samples_csv(const FitResult& fit) {
  const auto names = fit_param_names(fit.config.model);
  std::string s = "chain,iteration,parameter,component,value\n";
  for (const auto& ch : fit.chains)
    for (const auto& d : ch.draws) {
      const std::string prefix = std::to_string(ch.chain_id) + "," + std::to_string(d.iteration) + ",";
      for (std::size_t j = 0; j < d.state.ncomp(); ++j)
        for (const auto& name : names)
          s += prefix + name + "," + std::to_string(j + 1) + "," +
               format_double(param_value(fit.config.model, d.state, name, j)) + "\n";
      for (std::size_t j = 0; j < d.accepted.size(); ++j)
        s += prefix + "accepted," + std::to_string(j + 1) + "," + std::to_string(int{d.accepted[j]}) + "\n";
      s += prefix + "loglik,0," + format_double(d.loglik) + "\n";
      s += prefix + "lpd,0," + format_double(d.lpd) + "\n";
    }
  return s;
}

void write_samples_csv(const fs::path& path, const FitResult& fit) { write_text(path, samples_csv(fit)); }

void read_samples_csv(const fs::path& path, FitResult& fit) {
  const std::string text = read_text(path);
  const auto kind = fit.config.model;
  const auto names = param_names(kind);
  const std::size_t k = fit.ncomp();
  std::map<int, std::size_t> chain_index;
  fit.chains.clear();
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || trim(line) != "chain,iteration,parameter,component,value")
    throw DataError("samples file lacks the expected header");
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    double chain = 0, iter = 0, comp = 0, value = 0;
    if (f.size() != 5 || !parse_number(f[0], chain) || !parse_number(f[1], iter) || !parse_number(f[3], comp) ||
        !parse_number(f[4], value))
      throw DataError("malformed samples row " + std::to_string(line_no + 1));
    const int cid = static_cast<int>(chain);
    auto it = chain_index.find(cid);
    if (it == chain_index.end()) {
      it = chain_index.emplace(cid, fit.chains.size()).first;
      ChainSamples cs;
      cs.chain_id = cid;
      fit.chains.push_back(std::move(cs));
    }
    auto& draws = fit.chains[it->second].draws;
    if (draws.empty() || draws.back().iteration != static_cast<int>(iter)) {
      Draw d;
      d.iteration = static_cast<int>(iter);
      d.state.comps.assign(k, ComponentParams{});
      d.state.pmix.assign(k, 0.0);
      draws.push_back(std::move(d));
    }
    Draw& d = draws.back();
    const std::string& name = f[2];
    const auto j = static_cast<std::size_t>(comp) - 1;
    if (name == "loglik") {
      d.loglik = value;
    } else if (name == "lpd") {
      d.lpd = value;
    } else {
      if (comp < 1 || j >= k) throw DataError("component out of range in samples row " + std::to_string(line_no + 1));
      if (name == "pmix") {
        d.state.pmix[j] = value;
      } else if (name == "accepted") {
        if (d.accepted.size() < k) d.accepted.resize(k, 0);
        d.accepted[j] = static_cast<std::uint8_t>(value != 0.0);
      } else {
        const auto p = std::find(names.begin(), names.end(), name);
        if (p == names.end()) throw DataError("unknown parameter '" + name + "' in samples file");
        d.state.comps[j].set(kind, static_cast<int>(p - names.begin()), value);
      }
    }
  }
}

json fit_config_to_json(const FitConfig& c) {
  json j;
  j["model"] = std::string(to_string(c.model));
  j["ncomp"] = c.ncomp;
  j["n-iter"] = c.n_iter;
  j["burnin-prop"] = c.burnin_prop;
  j["thin"] = c.thin;
  j["n-chains"] = c.n_chains;
  j["method"] = std::string(to_string(c.method));
  j["perm-sampling"] = c.perm_sampling;
  j["cov-restrict"] = std::string(to_string(c.cov_restrict));
  j["unimodal-component"] = c.unimodal_component;
  j["int-displ"] = c.int_displ;
  j["n-qrnd"] = c.n_qrnd;
  j["seed"] = c.seed;
  j["norm-var"] = c.prior.norm_var;
  j["pmix-alpha"] = c.prior.pmix_alpha;
  j["epsilon-init"] = c.epsilon_init;
  j["L"] = c.L;
  j["epsilon-jitter"] = c.epsilon_jitter;
  j["propscale-init"] = c.propscale_init;
  j["tune-interval"] = c.tune_interval;
  j["autotune"] = c.autotune;
  j["keep-allocations"] = c.keep_allocations;
  return j;
}

bool apply_fit_setting(FitConfig& c, std::string key, const json& v) {
  key = normalize_key(key);
  if (key == "model") c.model = parse_model_kind(as_string(v, key));
  else if (key == "ncomp") c.ncomp = static_cast<int>(as_integer(v, key));
  else if (key == "n-iter") c.n_iter = static_cast<int>(as_integer(v, key));
  else if (key == "burnin-prop") c.burnin_prop = as_number(v, key);
  else if (key == "thin") c.thin = static_cast<int>(as_integer(v, key));
  else if (key == "n-chains") c.n_chains = static_cast<int>(as_integer(v, key));
  else if (key == "method") c.method = parse_method(as_string(v, key));
  else if (key == "perm-sampling") c.perm_sampling = as_bool(v, key);
  else if (key == "cov-restrict") c.cov_restrict = parse_cov_restrict(as_string(v, key));
  else if (key == "unimodal-component") c.unimodal_component = as_bool(v, key);
  else if (key == "int-displ") c.int_displ = static_cast<int>(as_integer(v, key));
  else if (key == "n-qrnd") {
    const auto n = as_integer(v, key);
    if (n < 1) throw ConfigError("'n-qrnd' must be positive");
    c.n_qrnd = static_cast<std::size_t>(n);
  } else if (key == "seed") {
    if (v.is_number_unsigned()) {
      c.seed = v.get<std::uint64_t>();
    } else {
      const auto s = as_integer(v, key);
      if (s < 0) throw ConfigError("'seed' must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    }
  } else if (key == "norm-var") c.prior.norm_var = as_number(v, key);
  else if (key == "pmix-alpha") {
    c.prior.pmix_alpha.clear();
    if (v.is_array()) {
      for (const auto& x : v) c.prior.pmix_alpha.push_back(as_number(x, key));
    } else if (v.is_string() && v.get<std::string>().find(',') != std::string::npos) {
      for (const auto& f : split(v.get<std::string>())) c.prior.pmix_alpha.push_back(as_number(json(f), key));
    } else {
      c.prior.pmix_alpha.push_back(as_number(v, key));
    }
  } else if (key == "epsilon-init") c.epsilon_init = as_number(v, key);
  else if (key == "L" || key == "l") c.L = static_cast<int>(as_integer(v, key));
  else if (key == "epsilon-jitter") c.epsilon_jitter = as_number(v, key);
  else if (key == "propscale-init") c.propscale_init = as_number(v, key);
  else if (key == "tune-interval") c.tune_interval = static_cast<int>(as_integer(v, key));
  else if (key == "autotune") c.autotune = as_bool(v, key);
  else if (key == "keep-allocations") c.keep_allocations = as_bool(v, key);
  else return false;
  return true;
}

json state_to_json(ModelKind kind, const MixtureState& state) {
  json comps = json::array();
  const auto names = param_names(kind);
  for (std::size_t j = 0; j < state.ncomp(); ++j) {
    json c;
    for (std::size_t p = 0; p < names.size(); ++p) c[names[p]] = state.comps[j].get(kind, static_cast<int>(p));
    c["pmix"] = state.pmix[j];
    comps.push_back(c);
  }
  return json{{"model", std::string(to_string(kind))}, {"components", comps}};
}

MixtureState state_from_json(const json& j, ModelKind& kind) {
  if (!j.is_object() || !j.contains("model") || !j.contains("components") || !j["components"].is_array())
    throw ConfigError("parameter JSON needs 'model' and a 'components' array");
  kind = parse_model_kind(as_string(j["model"], "model"));
  const auto names = param_names(kind);
  MixtureState s;
  bool any_weight = false;
  for (const auto& c : j["components"]) {
    ComponentParams p;
    if (data_dim(kind) == 1) p.kappa2 = p.kappa1;
    for (std::size_t i = 0; i < names.size(); ++i)
      if (c.contains(names[i])) p.set(kind, static_cast<int>(i), as_number(c[names[i]], names[i]));
    s.comps.push_back(p);
    if (c.contains("pmix")) {
      s.pmix.push_back(as_number(c["pmix"], "pmix"));
      any_weight = true;
    } else {
      s.pmix.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  if (s.comps.empty()) throw ConfigError("parameter JSON has no components");
  if (!any_weight) std::fill(s.pmix.begin(), s.pmix.end(), 1.0 / static_cast<double>(s.comps.size()));
  for (double w : s.pmix)
    if (std::isnan(w)) throw ConfigError("either every component or none must give 'pmix'");
  validate_state(s);
  for (const auto& c : s.comps) validate_params(kind, c);
  return s;
}

json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void save_fit(const fs::path& dir, const FitResult& fit) {
  fs::create_directories(dir);
  json chains = json::array();
  for (const auto& ch : fit.chains) {
    json c{{"id", ch.chain_id}, {"accepted", ch.accepted}, {"proposed", ch.proposed}, {"divergent", ch.divergent}};
    c["final_step"] = ch.tuning.empty() ? json::array() : json(ch.tuning.back().step);
    chains.push_back(c);
  }
  json m{{"format", "torusmix-fit"},
         {"version", kFitFormatVersion},
         {"config", fit_config_to_json(fit.config)},
         {"n_data", fit.data.size()},
         {"data_dim", fit.data.dim()},
         {"chains", chains},
         {"warnings", fit.warnings}};
  write_json(dir / "manifest.json", m);
  write_samples_csv(dir / "samples.csv", fit);
  write_angle_csv(dir / "data.csv", fit.data);
}

FitResult load_fit(const fs::path& dir) {
  const json m = read_json(dir / "manifest.json");
  if (m.value("format", "") != "torusmix-fit") throw DataError("'" + dir.string() + "' is not a fit directory");
  if (m.value("version", 0) != kFitFormatVersion) throw DataError("unsupported fit format version");
  FitResult fit;
  for (const auto& [key, value] : m["config"].items())
    if (!apply_fit_setting(fit.config, key, value)) throw DataError("unknown config key '" + key + "' in manifest");
  fit.data = read_angle_csv(dir / "data.csv");
  if (fit.data.dim() != data_dim(fit.config.model)) throw DataError("dimension mismatch between data and model");
  read_samples_csv(dir / "samples.csv", fit);
  for (const auto& c : m["chains"]) {
    const int id = c.at("id").get<int>();
    for (auto& ch : fit.chains)
      if (ch.chain_id == id) {
        ch.accepted = c.at("accepted").get<std::vector<std::size_t>>();
        ch.proposed = c.at("proposed").get<std::vector<std::size_t>>();
        ch.divergent = c.at("divergent").get<std::size_t>();
      }
  }
  fit.warnings = m.value("warnings", std::vector<std::string>{});
  return fit;
}

}  // namespace torusmix
