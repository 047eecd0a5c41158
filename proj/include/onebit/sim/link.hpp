#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "onebit/numerics/dft.hpp"
#include "onebit/numerics/rng.hpp"
#include "onebit/sim/channel.hpp"
#include "onebit/sim/config.hpp"
#include "onebit/sim/pilots.hpp"

namespace onebit::sim {

/// Unquantized time-domain samples of one pilot symbol at every antenna.
struct RxSlot {
  std::size_t slot = 0;
  std::size_t user = 0;
  std::size_t pilot = 0;
  std::vector<CVec> y;  // y[m], length N_f
};

/// The N_f x M receive matrix R of one pilot symbol; column m is r[m] (time domain).
struct QuantizedRxBlock {
  std::size_t slot = 0;
  std::size_t user = 0;
  std::size_t pilot = 0;
  bool quantized = true;  // false when the converter was bypassed and R holds y
  CMatrix R;
};

/// (h (*) s)[n] = sum_l h[l] s[(n - l) mod N], i.e. the circulant H applied to s.
inline CVec circular_convolve(const CVec& h, const CVec& s) {
  require_dims(h.size() == s.size(), "circular_convolve: length mismatch");
  const std::size_t n = s.size();
  CVec out(n);
  for (std::size_t l = 0; l < n; ++l) {
    if (h[l] == cplx{}) continue;
    for (std::size_t i = 0; i < n; ++i) out[i] += h[l] * s[(i + n - l) % n];
  }
  return out;
}

/// y[m] = H_k[m] F^H x_{k,p} + w[m] for every pilot symbol, in slot order.
/// Noise draw order: slot, antenna, sample.
inline std::vector<RxSlot> transmit_block(const ChannelRealization& ch, const PilotBook& book, const SystemConfig& cfg,
                                          Rng& rng) {
  require_dims(ch.users == cfg.users && ch.antennas == cfg.antennas && ch.subcarriers == cfg.subcarriers,
               "transmit_block: channel does not match config");
  require_dims(book.users == cfg.users && book.pilots_per_user == cfg.pilots, "transmit_block: pilot book mismatch");
  const DftPlan plan(cfg.subcarriers);
  const double sigma2 = cfg.noise_variance();
  std::vector<RxSlot> out;
  for (std::size_t n = 0; n < book.slot_owner.size(); ++n) {
    const int owner = book.slot_owner[n];
    if (owner < 0) continue;
    const auto k = static_cast<std::size_t>(owner);
    const std::size_t p = n - book.slot[k].front();
    const CVec s = plan.inverse(book.pilot(k, p));
    RxSlot rx{n, k, p, {}};
    rx.y.reserve(cfg.antennas);
    for (std::size_t m = 0; m < cfg.antennas; ++m) {
      CVec y = circular_convolve(ch.taps[k][m], s);
      if (sigma2 > 0.0)
        for (auto& v : y) v += rng.complex_normal(sigma2);
      rx.y.push_back(std::move(y));
    }
    out.push_back(std::move(rx));
  }
  return out;
}

inline double sign_or_plus(double v) { return v < 0.0 ? -1.0 : 1.0; }

/// Complex one-bit converter: (sign(Re y) + j sign(Im y)) / sqrt(2), with sign(0) = +1.
inline CVec one_bit_quantize(std::span<const cplx> y) {
  constexpr double a = std::numbers::sqrt2 / 2.0;
  CVec out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = {a * sign_or_plus(y[i].real()), a * sign_or_plus(y[i].imag())};
  return out;
}

/// R = [r[1] ... r[M]].
inline CMatrix assemble_rx(std::span<const CVec> per_antenna) {
  require_dims(!per_antenna.empty(), "assemble_rx: no antennas");
  const std::size_t nf = per_antenna.front().size();
  CMatrix R(nf, per_antenna.size());
  for (std::size_t m = 0; m < per_antenna.size(); ++m) {
    require_dims(per_antenna[m].size() == nf, "assemble_rx: ragged antenna vectors");
    R.set_column(m, per_antenna[m]);
  }
  return R;
}

/// Front end: quantize each antenna (unless cfg.quantize is off) and assemble R per slot.
inline std::vector<QuantizedRxBlock> receive(std::span<const RxSlot> slots, const SystemConfig& cfg) {
  std::vector<QuantizedRxBlock> out;
  out.reserve(slots.size());
  for (const auto& s : slots) {
    QuantizedRxBlock b{s.slot, s.user, s.pilot, cfg.quantize, {}};
    if (cfg.quantize) {
      std::vector<CVec> r;
      r.reserve(s.y.size());
      for (const auto& y : s.y) r.push_back(one_bit_quantize(y));
      b.R = assemble_rx(r);
    } else {
      b.R = assemble_rx(s.y);
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace onebit::sim

namespace onebit::sim {

/// Scalar Bussgang gain of the complex one-bit converter for a circularly-symmetric Gaussian
/// input of power sigma_y^2: E[r y*] / E[|y|^2] = sqrt(2/pi) / sigma_y.
inline double bussgang_gain(double received_power) {
  return std::sqrt(2.0 / std::numbers::pi) / std::sqrt(received_power);
}

/// Gain at the nominal received power 1 + sigma^2; 1 when the converter is bypassed.
inline double nominal_bussgang_gain(const SystemConfig& cfg) {
  return cfg.quantize ? bussgang_gain(1.0 + cfg.noise_variance()) : 1.0;
}

}  // namespace onebit::sim
