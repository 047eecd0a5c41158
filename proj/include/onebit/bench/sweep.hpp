#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "onebit/bench/baselines.hpp"
#include "onebit/bench/experiment.hpp"
#include "onebit/bench/nmse.hpp"
#include "onebit/sim/channel.hpp"
#include "onebit/sim/link.hpp"
#include "onebit/sim/pilots.hpp"
#include "onebit/stage1/estimator.hpp"
#include "onebit/stage2/dip.hpp"

namespace onebit::bench {

struct NmseRow {
  double snr_db = 0.0;
  std::string method;
  double nmse_db = 0.0;
  std::size_t realizations = 0;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;

  friend bool operator==(const NmseRow&, const NmseRow&) = default;
};

/// Linear NMSE of one method on one realization, averaged over the evaluated users.
struct RealizationResult {
  double snr_db = 0.0;
  std::size_t realization = 0;
  Method method = Method::pipeline;
  double nmse = 0.0;
};

struct NmseReport {
  std::vector<NmseRow> rows;                 // sorted by (snr_db, method)
  std::vector<RealizationResult> details;  // in evaluation order
};

struct SweepError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool wants(const std::vector<Method>& ms, Method m) { return std::find(ms.begin(), ms.end(), m) != ms.end(); }

using ProgressFn = std::function<void(const std::string&)>;

/// Seed streams (split rule of derive_seed):
///   channel and pilots  {1, r}       -- shared by every SNR point of realization r
///   noise               {2, r, s}
///   stage-1 networks    {3, r, s}    -- extended internally with {k, m}
///   DIP                 {4, r, s, k}
inline NmseReport run_sweep(ExperimentConfig cfg, const ProgressFn& progress = {}) {
  cfg.sync();
  cfg.validate();
  using clock = std::chrono::steady_clock;

  std::map<std::pair<std::size_t, Method>, double> sum;   // (snr index, method) -> sum of linear NMSE
  std::map<std::pair<std::size_t, Method>, double> time;  // wall seconds
  NmseReport report;
  const std::size_t n_users = cfg.all_users ? cfg.system.users : 1;

  for (std::size_t r = 0; r < cfg.realizations; ++r) {
    sim::SystemConfig base = cfg.system;
    Rng chan_rng(derive_seed(cfg.seed, {1, r}));
    const sim::ChannelRealization ch = sim::sample_channel(base, chan_rng);
    const sim::PilotBook book = sim::build_pilot_book(base, chan_rng);

    for (std::size_t s = 0; s < cfg.snr_db.size(); ++s) {
      sim::SystemConfig sys = base;
      sys.snr_db = cfg.snr_db[s];
      try {
        Rng noise_rng(derive_seed(cfg.seed, {2, r, s}));
        const auto slots = sim::transmit_block(ch, book, sys, noise_rng);
        const auto blocks = sim::receive(slots, sys);

        std::map<Method, double> acc;
        for (std::size_t k = 0; k < n_users; ++k) {
          const CMatrix& truth = ch.lambda[k];
          auto timed = [&](Method m, auto&& fn) {
            const auto t0 = clock::now();
            CMatrix est = fn();
            time[{s, m}] += std::chrono::duration<double>(clock::now() - t0).count();
            return est;
          };
          std::optional<CMatrix> stage1_est;
          if (wants(cfg.methods, Method::stage1_only) || wants(cfg.methods, Method::pipeline)) {
            stage1::Stage1Params hp = cfg.stage1;
            hp.seed = derive_seed(cfg.seed, {3, r, s});
            stage1_est = timed(Method::stage1_only,
                               [&] { return stage1::run_stage1(blocks, book, k, sys, hp).lambda_hat; });
            if (wants(cfg.methods, Method::stage1_only))
              acc[Method::stage1_only] += nmse_linear(*stage1_est, truth);
          }
          if (wants(cfg.methods, Method::pipeline)) {
            stage2::DipConfig dc = cfg.dip;
            dc.seed = derive_seed(cfg.seed, {4, r, s, k});
            const CMatrix est = timed(Method::pipeline, [&] { return stage2::denoise(*stage1_est, dc); });
            acc[Method::pipeline] += nmse_linear(est, truth);
          }
          if (wants(cfg.methods, Method::bussgang_ls)) {
            const CMatrix est = timed(Method::bussgang_ls,
                                      [&] { return bussgang_ls_baseline(blocks, book, k, sys.snr_db); });
            acc[Method::bussgang_ls] += nmse_linear(est, truth);
          }
          if (wants(cfg.methods, Method::ls_unquantized)) {
            const CMatrix est = timed(Method::ls_unquantized, [&] { return ls_unquantized_baseline(slots, book, k); });
            acc[Method::ls_unquantized] += nmse_linear(est, truth);
          }
        }
        for (Method m : cfg.methods) {
          const double v = acc[m] / static_cast<double>(n_users);
          sum[{s, m}] += v;
          report.details.push_back({sys.snr_db, r, m, v});
        }
      } catch (const std::exception& e) {
        throw SweepError("sweep failed at snr " + std::to_string(sys.snr_db) + " dB, realization " +
                         std::to_string(r) + ": " + e.what());
      }
      if (progress)
        progress("realization " + std::to_string(r + 1) + "/" + std::to_string(cfg.realizations) + ", snr " +
                 std::to_string(sys.snr_db) + " dB done");
    }
  }

  for (std::size_t s = 0; s < cfg.snr_db.size(); ++s)
    for (Method m : cfg.methods) {
      double wall = 0.0;
      if (cfg.record_wall_time) {
        wall = time[{s, m}];
        if (m == Method::pipeline) wall += time[{s, Method::stage1_only}];
      }
      report.rows.push_back({cfg.snr_db[s], method_name(m),
                             to_db_floored(sum[{s, m}] / static_cast<double>(cfg.realizations)), cfg.realizations,
                             cfg.seed, wall});
    }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const NmseRow& a, const NmseRow& b) {
    if (a.snr_db != b.snr_db) return a.snr_db < b.snr_db;
    return a.method < b.method;
  });
  return report;
}

/// Mean linear NMSE of one method at one SNR over the report's per-realization details.
inline double mean_nmse(const NmseReport& r, Method m, double snr_db) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& d : r.details)
    if (d.method == m && d.snr_db == snr_db) s += d.nmse, ++n;
  if (n == 0) throw std::invalid_argument("mean_nmse: no entries for " + method_name(m));
  return s / static_cast<double>(n);
}

}  // namespace onebit::bench
