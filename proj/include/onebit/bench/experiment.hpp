#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "onebit/sim/config.hpp"
#include "onebit/stage1/estimator.hpp"
#include "onebit/stage2/dip.hpp"

namespace onebit::bench {

enum class Method { pipeline, stage1_only, ls_unquantized, bussgang_ls };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::pipeline: return "pipeline";
    case Method::stage1_only: return "stage1-only";
    case Method::ls_unquantized: return "ls-unquantized";
    case Method::bussgang_ls: return "bussgang-ls";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  for (Method m : {Method::pipeline, Method::stage1_only, Method::ls_unquantized, Method::bussgang_ls})
    if (method_name(m) == s) return m;
  throw std::invalid_argument("unknown method '" + s + "'");
}

struct ExperimentConfig {
  sim::SystemConfig system;
  stage1::Stage1Params stage1;
  stage2::DipConfig dip;
  std::vector<double> snr_db = {-10, -5, 0, 5, 10, 15, 20, 25, 30};
  std::size_t realizations = 20;
  std::vector<Method> methods = {Method::pipeline, Method::stage1_only, Method::ls_unquantized, Method::bussgang_ls};
  std::string output = "nmse.csv";
  std::uint64_t seed = 1;
  bool all_users = true;          // false: evaluate user 0 only
  bool record_wall_time = false;  // off keeps the CSV byte-reproducible

  /// Copies the system geometry into the DIP block (its N_f, M and output width always follow the system).
  void sync() {
    dip.subcarriers = system.subcarriers;
    dip.antennas = system.antennas;
    if (!dip.widths.empty()) dip.widths.back() = 2 * system.antennas;
    system.seed = seed;
  }

  void validate() const {
    system.validate();
    dip.validate();
    if (realizations < 1) throw std::invalid_argument("ExperimentConfig: realizations must be >= 1");
    if (snr_db.empty()) throw std::invalid_argument("ExperimentConfig: SNR sweep is empty");
    if (methods.empty()) throw std::invalid_argument("ExperimentConfig: no methods selected");
    if (system.users * system.pilots > system.symbols)
      throw std::invalid_argument("ExperimentConfig: K * N_t exceeds the coherence interval");
  }
};

/// Reduced desk-scale scenario (M = 8, N_f = 32) with DIP geometry scaled to match.
inline ExperimentConfig reduced_profile(ExperimentConfig cfg = {}) {
  cfg.system.antennas = 8;
  cfg.system.subcarriers = 32;
  cfg.system.taps = sim::map_to_sample_grid(sim::epa_profile(), 32);
  cfg.dip.layers = 3;
  cfg.dip.widths = {8, 8, 8, 16};
  cfg.dip.time_symbols = 4;
  cfg.realizations = 10;
  cfg.sync();
  return cfg;
}

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
  for (const auto& [key, _] : j.items())
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      throw std::invalid_argument("config: unknown key '" + key + "' in '" + where + "'");
}

}  // namespace detail

/// Every key is optional; unknown keys are rejected so typos do not silently fall back to defaults.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using detail::read_opt;
  ExperimentConfig cfg;
  detail::check_keys(j, {"system", "stage1", "dip", "sweep"}, "<root>");

  std::vector<sim::TapSpec> profile = sim::epa_profile();
  double spacing = 15e3;
  if (j.contains("system")) {
    const auto& s = j["system"];
    detail::check_keys(s, {"users", "antennas", "subcarriers", "symbols", "pilots", "tap_profile", "tap_profile_file",
                           "subcarrier_spacing_hz", "noise", "quantize"},
                       "system");
    read_opt(s, "users", cfg.system.users);
    read_opt(s, "antennas", cfg.system.antennas);
    read_opt(s, "subcarriers", cfg.system.subcarriers);
    read_opt(s, "symbols", cfg.system.symbols);
    read_opt(s, "pilots", cfg.system.pilots);
    read_opt(s, "noise", cfg.system.noise);
    read_opt(s, "quantize", cfg.system.quantize);
    read_opt(s, "subcarrier_spacing_hz", spacing);
    if (s.contains("tap_profile")) {
      const auto& tp = s["tap_profile"];
      if (tp.is_string()) {
        if (tp.get<std::string>() != "epa") throw std::invalid_argument("config: unknown tap profile name");
      } else {
        profile = sim::parse_tap_profile(tp);
      }
    }
    if (s.contains("tap_profile_file")) profile = sim::load_tap_profile(s["tap_profile_file"].get<std::string>());
  }
  cfg.system.taps = sim::map_to_sample_grid(profile, cfg.system.subcarriers, spacing);

  if (j.contains("stage1")) {
    const auto& s = j["stage1"];
    detail::check_keys(s, {"epochs", "learning_rate", "generated_samples", "seed", "label_scaling", "threads"},
                       "stage1");
    read_opt(s, "epochs", cfg.stage1.epochs);
    read_opt(s, "learning_rate", cfg.stage1.learning_rate);
    read_opt(s, "generated_samples", cfg.stage1.generated_samples);
    read_opt(s, "seed", cfg.stage1.seed);
    read_opt(s, "threads", cfg.stage1.threads);
    if (s.contains("label_scaling")) {
      const auto v = s["label_scaling"].get<std::string>();
      if (v == "none") cfg.stage1.label_scaling = stage1::LabelScaling::none;
      else if (v == "bussgang") cfg.stage1.label_scaling = stage1::LabelScaling::bussgang;
      else throw std::invalid_argument("config: label_scaling must be 'none' or 'bussgang'");
    }
  }

  if (j.contains("dip")) {
    const auto& s = j["dip"];
    detail::check_keys(s, {"layers", "widths", "time_symbols", "iterations", "learning_rate", "input_scale", "seed"},
                       "dip");
    read_opt(s, "layers", cfg.dip.layers);
    read_opt(s, "widths", cfg.dip.widths);
    read_opt(s, "time_symbols", cfg.dip.time_symbols);
    read_opt(s, "iterations", cfg.dip.iterations);
    read_opt(s, "learning_rate", cfg.dip.learning_rate);
    read_opt(s, "input_scale", cfg.dip.input_scale);
    read_opt(s, "seed", cfg.dip.seed);
  }

  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    detail::check_keys(s, {"snr_db", "realizations", "methods", "output", "seed", "all_users", "record_wall_time"},
                       "sweep");
    read_opt(s, "snr_db", cfg.snr_db);
    read_opt(s, "realizations", cfg.realizations);
    read_opt(s, "output", cfg.output);
    read_opt(s, "seed", cfg.seed);
    read_opt(s, "all_users", cfg.all_users);
    read_opt(s, "record_wall_time", cfg.record_wall_time);
    if (s.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : s["methods"]) cfg.methods.push_back(parse_method(m.get<std::string>()));
    }
  }
  cfg.sync();
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_experiment_config(j);
}

}  // namespace onebit::bench
