// Command-line front end. Settings come from defaults, then a JSON config
// file (--config), then command-line flags, each layer overriding the last.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "torusmix/mcmc.hpp"
#include "torusmix/modelselect.hpp"
#include "torusmix/postprocess.hpp"

namespace torusmix {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitNumeric = 4 };

struct RunConfig {
  FitConfig fit;
  std::string input;
  std::string out;
  bool degrees = false;
  bool relabel = false;
  Reducer estimator = Reducer::MEAN;
  double frac1 = 0.1;
  double frac2 = 0.5;
  IncrementalConfig incremental;
  int resolution = 200;
  std::string params;
  std::string fit_dir;
  std::string fit_a;
  std::string fit_b;
  long long n = 100;
};

// Applies one kebab-case setting; throws ConfigError for unknown keys or
// bad values.
void apply_setting(RunConfig& rc, const std::string& key, const nlohmann::json& value);

// Output files of a fit: the fit directory plus summary.json and
// diagnostics.json.
nlohmann::json fit_summary(const FitResult& fit, const RunConfig& rc);
nlohmann::json fit_diagnostics(const FitResult& fit, const RunConfig& rc);
void write_fit_outputs(const std::filesystem::path& dir, const FitResult& fit, const RunConfig& rc);

nlohmann::json summarize_data(const AngleData& data);

// Density of a mixture over a res x res (or res) lattice with spacing
// 2pi/res starting at 0: rows psi1,psi2,density or psi,density.
std::string density_grid_csv(ModelKind kind, const MixtureState& state, int resolution, const FitConfig& cfg = {});

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace torusmix
