#pragma once

#include <stdexcept>
#include <vector>

#include "onebit/numerics/rng.hpp"
#include "onebit/sim/config.hpp"

namespace onebit::sim {

/// Frequency-domain QPSK pilots with time-division orthogonality across users.
struct PilotBook {
  std::size_t users = 0;
  std::size_t pilots_per_user = 0;
  std::vector<std::vector<CVec>> pilots;     // pilots[k][p], length N_f
  std::vector<std::vector<std::size_t>> slot;  // slot[k][p]: OFDM symbol index carrying x_{k,p}
  std::vector<int> slot_owner;               // per symbol: owning user, -1 if no pilot

  const CVec& pilot(std::size_t k, std::size_t p) const { return pilots.at(k).at(p); }
};

/// User k sends pilot p in symbol k * N_t + p.
inline PilotBook build_pilot_book(const SystemConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.users * cfg.pilots > cfg.symbols)
    throw std::invalid_argument("coherence interval too short: K*N_t = " + std::to_string(cfg.users * cfg.pilots) +
                                " > N = " + std::to_string(cfg.symbols));
  PilotBook book;
  book.users = cfg.users;
  book.pilots_per_user = cfg.pilots;
  book.slot_owner.assign(cfg.symbols, -1);
  book.pilots.resize(cfg.users);
  book.slot.resize(cfg.users);
  for (std::size_t k = 0; k < cfg.users; ++k) {
    for (std::size_t p = 0; p < cfg.pilots; ++p) {
      CVec x(cfg.subcarriers);
      for (auto& s : x) s = rng.qpsk();
      book.pilots[k].push_back(std::move(x));
      const std::size_t n = k * cfg.pilots + p;
      book.slot[k].push_back(n);
      book.slot_owner[n] = static_cast<int>(k);
    }
  }
  return book;
}

}  // namespace onebit::sim
