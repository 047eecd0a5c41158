#pragma once

#include <cmath>
#include <vector>

#include "onebit/numerics/dft.hpp"
#include "onebit/numerics/rng.hpp"
#include "onebit/sim/config.hpp"

namespace onebit::sim {

/// Per (user, antenna) impulse responses and the stacked frequency responses.
struct ChannelRealization {
  std::size_t users = 0;
  std::size_t antennas = 0;
  std::size_t subcarriers = 0;
  std::vector<std::vector<CVec>> taps;  // taps[k][m], length N_f, zero-padded
  std::vector<CMatrix> lambda;          // lambda[k]: N_f x M

  const CVec& impulse(std::size_t k, std::size_t m) const {
    require_dims(k < users && m < antennas, "ChannelRealization: (user, antenna) out of range");
    return taps[k][m];
  }
};

/// Eigenvalues of the circulant matrix whose first column is h: diag(F H F^H) = sqrt(N) F h.
inline CVec circulant_eigenvalues(const DftPlan& plan, const CVec& h) {
  CVec out = plan.forward(h);
  const double s = std::sqrt(static_cast<double>(plan.size()));
  for (auto& z : out) z *= s;
  return out;
}

inline ChannelRealization realize_channel(std::vector<std::vector<CVec>> taps, std::size_t subcarriers) {
  ChannelRealization ch;
  ch.users = taps.size();
  ch.antennas = taps.empty() ? 0 : taps.front().size();
  ch.subcarriers = subcarriers;
  const DftPlan plan(subcarriers);
  for (std::size_t k = 0; k < ch.users; ++k) {
    require_dims(taps[k].size() == ch.antennas, "realize_channel: ragged antenna count");
    CMatrix lam(subcarriers, ch.antennas);
    for (std::size_t m = 0; m < ch.antennas; ++m) lam.set_column(m, circulant_eigenvalues(plan, taps[k][m]));
    ch.lambda.push_back(std::move(lam));
  }
  ch.taps = std::move(taps);
  return ch;
}

/// Independent CN(0, power) per (user, antenna, tap); draw order is k, m, tap.
inline ChannelRealization sample_channel(const SystemConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<std::vector<CVec>> taps(cfg.users, std::vector<CVec>(cfg.antennas, CVec(cfg.subcarriers)));
  for (std::size_t k = 0; k < cfg.users; ++k)
    for (std::size_t m = 0; m < cfg.antennas; ++m)
      for (const auto& t : cfg.taps) taps[k][m][t.delay] += rng.complex_normal(t.power);
  return realize_channel(std::move(taps), cfg.subcarriers);
}

/// lambda_k[m] = diag(Lambda_k[m]).
inline CVec freq_response(const ChannelRealization& ch, std::size_t k, std::size_t m) {
  require_dims(k < ch.users && m < ch.antennas, "freq_response: (user, antenna) out of range");
  return ch.lambda[k].column(m);
}

}  // namespace onebit::sim
