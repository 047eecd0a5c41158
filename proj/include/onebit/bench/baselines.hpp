#pragma once

#include <span>
#include <stdexcept>

#include "onebit/numerics/dft.hpp"
#include "onebit/sim/link.hpp"
#include "onebit/stage1/labels.hpp"

namespace onebit::bench {

namespace detail {

/// Mean over user k's pilots of (F v_m)_n conj(x_n); `columns(item)` yields the per-antenna vectors.
template <class Item, class Columns>
CMatrix derotate_average(std::span<const Item> items, const sim::PilotBook& book, std::size_t k, Columns columns,
                         const char* who) {
  require_dims(k < book.users, std::string(who) + ": user out of range");
  const std::size_t nf = book.pilot(k, 0).size();
  const DftPlan plan(nf);
  std::size_t used = 0;
  CMatrix est;
  for (const auto& item : items) {
    if (item.user != k) continue;
    const std::vector<CVec> cols = columns(item);
    if (used == 0) est = CMatrix(nf, cols.size());
    require_dims(cols.size() == est.cols(), std::string(who) + ": antenna count changed between slots");
    const CVec& x = book.pilot(k, item.pilot);
    for (std::size_t m = 0; m < cols.size(); ++m) {
      const CVec label = stage1::make_label(plan, cols[m], x);
      for (std::size_t n = 0; n < nf; ++n) est(n, m) += label[n];
    }
    ++used;
  }
  if (used == 0) throw std::invalid_argument(std::string(who) + ": no slots for user " + std::to_string(k));
  for (auto& z : est.data()) z /= static_cast<double>(used);
  return est;
}

}  // namespace detail

/// Least squares on the pre-converter samples; a reference that ignores the one-bit loss.
inline CMatrix ls_unquantized_baseline(std::span<const sim::RxSlot> slots, const sim::PilotBook& book, std::size_t k) {
  return detail::derotate_average(slots, book, k, [](const sim::RxSlot& s) { return s.y; },
                                  "ls_unquantized_baseline");
}

/// Linearizes r = G y + d with the scalar Bussgang gain at received power 1 + sigma^2,
/// then applies the LS derotate-and-average to r / G.
inline CMatrix bussgang_ls_baseline(std::span<const sim::QuantizedRxBlock> blocks, const sim::PilotBook& book,
                                    std::size_t k, double snr_db) {
  CMatrix est = detail::derotate_average(
      blocks, book, k,
      [](const sim::QuantizedRxBlock& b) {
        std::vector<CVec> cols;
        for (std::size_t m = 0; m < b.R.cols(); ++m) cols.push_back(b.R.column(m));
        return cols;
      },
      "bussgang_ls_baseline");
  const double gain = sim::bussgang_gain(1.0 + std::pow(10.0, -snr_db / 10.0));
  for (auto& z : est.data()) z /= gain;
  return est;
}

}  // namespace onebit::bench
