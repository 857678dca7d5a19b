// File formats: angle CSV input, the long-format samples CSV, JSON encodings
// of configurations and mixture states, and the fit directory
// (manifest.json + samples.csv + data.csv).
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "torusmix/mcmc.hpp"

namespace torusmix {

inline constexpr int kFitFormatVersion = 1;

// %.17g
std::string format_double(double x);

// One or two numeric columns, comma separated, optional header line. Values
// outside [0, 2pi) are reduced with a note appended to `warnings`.
AngleData read_angle_csv(const std::filesystem::path& path, bool degrees = false,
                         std::vector<std::string>* warnings = nullptr);
AngleData parse_angle_csv(std::string_view text, bool degrees = false, std::vector<std::string>* warnings = nullptr);
void write_angle_csv(const std::filesystem::path& path, const AngleData& data);

// Rows chain,iteration,parameter,component,value: one per parameter and
// component of every retained draw, then "accepted" flags per component and
// "loglik" and "lpd" with component 0.
void write_samples_csv(const std::filesystem::path& path, const FitResult& fit);
std::string samples_csv(const FitResult& fit);
// Rebuilds the draws of `fit` (config and data must already be set).
void read_samples_csv(const std::filesystem::path& path, FitResult& fit);

// Kebab-case keys mirroring FitConfig fields.
nlohmann::json fit_config_to_json(const FitConfig& c);
// Returns false when the key is not a FitConfig field. Underscores in keys
// are treated as hyphens. Throws ConfigError on a bad value.
bool apply_fit_setting(FitConfig& c, std::string key, const nlohmann::json& value);

nlohmann::json state_to_json(ModelKind kind, const MixtureState& state);
// {"model": ..., "components": [{param: value, ..., "pmix": w}, ...]}; pmix
// defaults to equal weights. Returns the model kind through `kind`.
MixtureState state_from_json(const nlohmann::json& j, ModelKind& kind);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

void save_fit(const std::filesystem::path& dir, const FitResult& fit);
FitResult load_fit(const std::filesystem::path& dir);

}  // namespace torusmix
