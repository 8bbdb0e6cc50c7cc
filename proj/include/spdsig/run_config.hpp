#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "spdsig/errors.hpp"
#include "spdsig/gar.hpp"
#include "spdsig/ingest.hpp"
#include "spdsig/moments.hpp"
#include "spdsig/signal.hpp"

namespace spdsig {

/// One batch run, fully specified. Loaded from a key = value config file,
/// overridable through SPDSIG_<KEY> environment variables and a few CLI
/// flags; every numerical default is pinned here.
struct RunConfig {
  // inputs
  std::string spd_csv;
  std::string gdp_csv;
  std::string nfci_csv;
  std::string variable = "hicp";
  std::string horizon = "1y";

  // signal extraction
  double target = 2.0;
  double tail_width = 0.0;  // 0 = copy the neighbouring bin's width
  double epsilon_mean = 1e-6;
  double bowley_tail_share = 0.25;
  double bowley_saturation_high = 1.0;
  double bowley_saturation_low = -1.0;
  std::string aggregation = "mean";        // mean | median
  std::string norm_scheme = "full_sample"; // full_sample | rolling
  int norm_window = 12;
  std::string spf_aggregation = "mean";    // mean | median

  // macro handling
  std::string macro_aggregation = "last";  // last | mean
  int horizon_quarters = 1;

  // growth-at-risk evaluation
  std::string eval_scheme = "expanding";   // expanding | rolling
  double initial_fraction = 0.6;
  int min_eval_quarters = 20;
  double shape_min = -30.0, shape_max = 30.0;
  double dof_min = 1.2, dof_max = 100.0;
  double crps_coverage = 12.0;
  double ls_cap = 1e3;

  // run plumbing
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  MomentOptions moment_options() const {
    MomentOptions o;
    o.epsilon_mean = epsilon_mean;
    o.tail_rule = ExtremeTailRule{bowley_tail_share, bowley_saturation_high,
                                  bowley_saturation_low};
    return o;
  }
  TailPolicy tail_policy() const { return TailPolicy{tail_width}; }
  AggregateMethod aggregate_method() const {
    if (aggregation == "mean") return AggregateMethod::mean;
    if (aggregation == "median") return AggregateMethod::median;
    fail(errc::config_error, "aggregation must be 'mean' or 'median'");
  }
  NormScheme norm() const {
    if (norm_scheme == "full_sample") return NormScheme{NormScheme::Kind::full_sample, norm_window};
    if (norm_scheme == "rolling") return NormScheme{NormScheme::Kind::rolling, norm_window};
    fail(errc::config_error, "norm_scheme must be 'full_sample' or 'rolling'");
  }
  MacroAggregation macro_agg() const {
    if (macro_aggregation == "last") return MacroAggregation::last_observation;
    if (macro_aggregation == "mean") return MacroAggregation::mean;
    fail(errc::config_error, "macro_aggregation must be 'last' or 'mean'");
  }
  GarConfig gar() const {
    GarConfig g;
    if (eval_scheme == "expanding") {
      g.scheme = GarConfig::Scheme::expanding;
    } else if (eval_scheme == "rolling") {
      g.scheme = GarConfig::Scheme::rolling;
    } else {
      fail(errc::config_error, "eval_scheme must be 'expanding' or 'rolling'");
    }
    g.initial_fraction = initial_fraction;
    g.min_eval_periods = min_eval_quarters;
    g.fit.shape_min = shape_min;
    g.fit.shape_max = shape_max;
    g.fit.dof_min = dof_min;
    g.fit.dof_max = dof_max;
    g.fit.seed = seed;
    g.crps.coverage = crps_coverage;
    g.ls_cap = ls_cap;
    return g;
  }
};

namespace detail {

inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value,
                             const std::string& where) {
  auto as_double = [&] {
    try {
      return std::stod(value);
    } catch (const std::exception&) {
      fail(errc::config_error, where + ": number expected for '" + key + "', got '" + value + "'");
    }
  };
  auto as_int = [&] {
    try {
      return std::stoi(value);
    } catch (const std::exception&) {
      fail(errc::config_error, where + ": integer expected for '" + key + "'");
    }
  };
  if (key == "spd_csv") cfg.spd_csv = value;
  else if (key == "gdp_csv") cfg.gdp_csv = value;
  else if (key == "nfci_csv") cfg.nfci_csv = value;
  else if (key == "variable") cfg.variable = value;
  else if (key == "horizon") cfg.horizon = value;
  else if (key == "target") cfg.target = as_double();
  else if (key == "tail_width") cfg.tail_width = as_double();
  else if (key == "epsilon_mean") cfg.epsilon_mean = as_double();
  else if (key == "bowley_tail_share") cfg.bowley_tail_share = as_double();
  else if (key == "bowley_saturation_high") cfg.bowley_saturation_high = as_double();
  else if (key == "bowley_saturation_low") cfg.bowley_saturation_low = as_double();
  else if (key == "aggregation") cfg.aggregation = value;
  else if (key == "norm_scheme") cfg.norm_scheme = value;
  else if (key == "norm_window") cfg.norm_window = as_int();
  else if (key == "spf_aggregation") cfg.spf_aggregation = value;
  else if (key == "macro_aggregation") cfg.macro_aggregation = value;
  else if (key == "horizon_quarters") cfg.horizon_quarters = as_int();
  else if (key == "eval_scheme") cfg.eval_scheme = value;
  else if (key == "initial_fraction") cfg.initial_fraction = as_double();
  else if (key == "min_eval_quarters") cfg.min_eval_quarters = as_int();
  else if (key == "shape_min") cfg.shape_min = as_double();
  else if (key == "shape_max") cfg.shape_max = as_double();
  else if (key == "dof_min") cfg.dof_min = as_double();
  else if (key == "dof_max") cfg.dof_max = as_double();
  else if (key == "crps_coverage") cfg.crps_coverage = as_double();
  else if (key == "ls_cap") cfg.ls_cap = as_double();
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
  else fail(errc::config_error, where + ": unknown key '" + key + "'");
}

inline std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace detail

/// Key = value file, # comments, optional quotes around values. Relative
/// input paths are resolved against the config file's directory.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::config_error, "cannot open config '" + path + "'");
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(errc::config_error, path + ":" + std::to_string(line_no) + ": expected key = value");
    std::string key = detail::strip(line.substr(0, eq));
    std::string value = detail::strip(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    detail::apply_config_key(cfg, key, value, path + ":" + std::to_string(line_no));
  }
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative())
      p = (base / p).lexically_normal().string();
  };
  resolve(cfg.spd_csv);
  resolve(cfg.gdp_csv);
  resolve(cfg.nfci_csv);
  return cfg;
}

/// SPDSIG_<KEY>=value beats the file for every config key.
inline void apply_env_overrides(RunConfig& cfg, const char* prefix = "SPDSIG_") {
  static constexpr const char* keys[] = {
      "spd_csv", "gdp_csv", "nfci_csv", "variable", "horizon", "target", "tail_width",
      "epsilon_mean", "bowley_tail_share", "bowley_saturation_high", "bowley_saturation_low",
      "aggregation", "norm_scheme", "norm_window", "spf_aggregation", "macro_aggregation",
      "horizon_quarters", "eval_scheme", "initial_fraction", "min_eval_quarters", "shape_min",
      "shape_max", "dof_min", "dof_max", "crps_coverage", "ls_cap", "out_dir", "seed"};
  for (const char* key : keys) {
    std::string env_name = prefix;
    for (const char* c = key; *c; ++c)
      env_name += static_cast<char>(std::toupper(static_cast<unsigned char>(*c)));
    if (const char* v = std::getenv(env_name.c_str()))
      detail::apply_config_key(cfg, key, v, "environment " + env_name);
  }
}

/// Existence checks for every referenced input; numbers must be sane.
inline void validate_config(const RunConfig& cfg, bool need_macro) {
  if (cfg.spd_csv.empty()) fail(errc::config_error, "spd_csv is required");
  if (!std::filesystem::exists(cfg.spd_csv))
    fail(errc::config_error, "spd_csv '" + cfg.spd_csv + "' does not exist");
  if (need_macro) {
    auto check = [](const char* key, const std::string& p) {
      if (p.empty()) fail(errc::config_error, std::string(key) + " is required for this command");
      if (!std::filesystem::exists(p))
        fail(errc::config_error, std::string(key) + " '" + p + "' does not exist");
    };
    check("gdp_csv", cfg.gdp_csv);
    check("nfci_csv", cfg.nfci_csv);
  }
  if (!std::isfinite(cfg.target)) fail(errc::config_error, "target must be finite");
  if (!(cfg.initial_fraction > 0.0 && cfg.initial_fraction < 1.0))
    fail(errc::config_error, "initial_fraction must lie in (0,1)");
  if (!(cfg.dof_min > 1.0 && cfg.dof_max > cfg.dof_min))
    fail(errc::config_error, "dof bounds must satisfy 1 < dof_min < dof_max");
  cfg.aggregate_method();
  cfg.norm();
  cfg.macro_agg();
  if (cfg.eval_scheme != "expanding" && cfg.eval_scheme != "rolling")
    fail(errc::config_error, "eval_scheme must be 'expanding' or 'rolling'");
}

}  // namespace spdsig
