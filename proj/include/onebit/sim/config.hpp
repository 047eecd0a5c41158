#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "onebit/numerics/types.hpp"

namespace onebit::sim {

/// Physical power-delay profile entry.
struct TapSpec {
  double delay_ns = 0.0;
  double power_db = 0.0;
};

/// Tap on the sample grid with linear power.
struct Tap {
  std::size_t delay = 0;
  double power = 1.0;

  friend bool operator==(const Tap&, const Tap&) = default;
};

/// 3GPP Extended Pedestrian A.
inline std::vector<TapSpec> epa_profile() {
  return {{0, 0.0}, {30, -1.0}, {70, -2.0}, {90, -3.0}, {110, -8.0}, {190, -17.2}, {410, -20.8}};
}

/// Round each delay to the nearest sample at T_s = 1 / (n_subcarriers * spacing), merge taps
/// that land on the same sample, and normalize the powers to sum to one.
inline std::vector<Tap> map_to_sample_grid(std::span<const TapSpec> profile, std::size_t n_subcarriers,
                                           double subcarrier_spacing_hz = 15e3) {
  if (profile.empty()) throw std::invalid_argument("tap profile is empty");
  const double sample_period_ns = 1e9 / (static_cast<double>(n_subcarriers) * subcarrier_spacing_hz);
  std::vector<Tap> taps;
  double total = 0.0;
  for (const auto& tap : profile) {
    if (tap.delay_ns < 0.0) throw std::invalid_argument("tap delay must be non-negative");
    const auto delay = static_cast<std::size_t>(std::llround(tap.delay_ns / sample_period_ns));
    const double power = std::pow(10.0, tap.power_db / 10.0);
    total += power;
    bool merged = false;
    for (auto& t : taps)
      if (t.delay == delay) {
        t.power += power;
        merged = true;
      }
    if (!merged) taps.push_back({delay, power});
  }
  for (auto& t : taps) t.power /= total;
  return taps;
}

/// Profile file: a JSON array of {"delay_ns": ..., "power_db": ...} objects.
inline std::vector<TapSpec> parse_tap_profile(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("tap profile must be a JSON array");
  std::vector<TapSpec> out;
  for (const auto& e : j) out.push_back({e.at("delay_ns").get<double>(), e.at("power_db").get<double>()});
  return out;
}

inline std::vector<TapSpec> load_tap_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tap profile '" + path + "'");
  return parse_tap_profile(nlohmann::json::parse(in));
}

struct SystemConfig {
  std::size_t users = 4;         // K
  std::size_t antennas = 16;     // M
  std::size_t subcarriers = 64;  // N_f
  std::size_t symbols = 100;     // N, OFDM symbols per coherence interval
  std::size_t pilots = 20;       // N_t per user
  double snr_db = 10.0;
  std::uint64_t seed = 1;
  std::vector<Tap> taps = map_to_sample_grid(epa_profile(), 64);
  bool noise = true;     // false: w[m] = 0
  bool quantize = true;  // false: receiver sees y[m] instead of Q(y[m])

  /// sigma^2 per complex sample. Signal power is 1 per sample, so sigma^2 = 10^(-snr/10).
  double noise_variance() const { return noise ? std::pow(10.0, -snr_db / 10.0) : 0.0; }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("SystemConfig: " + m); };
    if (users < 1) fail("need at least one user");
    if (antennas < 1) fail("need at least one antenna");
    if (subcarriers < 1 || (subcarriers & (subcarriers - 1)) != 0) fail("subcarriers must be a power of two");
    if (pilots < 1) fail("need at least one pilot");
    if (pilots > symbols) fail("pilots per user exceed the coherence interval");
    if (taps.empty()) fail("tap profile is empty");
    double total = 0.0;
    for (const auto& t : taps) {
      if (t.delay >= subcarriers) fail("tap delay must be below the subcarrier count");
      if (!(t.power >= 0.0)) fail("tap powers must be non-negative");
      total += t.power;
    }
    if (std::abs(total - 1.0) > 1e-9) fail("tap powers must sum to 1");
  }
};

}  // namespace onebit::sim
