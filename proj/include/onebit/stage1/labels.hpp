#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "onebit/numerics/dft.hpp"
#include "onebit/sim/link.hpp"
#include "onebit/sim/pilots.hpp"

namespace onebit::stage1 {

/// label_n = (F r)_n * conj(x_n), the diagonal of F r x^H.
inline CVec make_label(const DftPlan& plan, std::span<const cplx> r, std::span<const cplx> x) {
  require_dims(r.size() == plan.size() && x.size() == plan.size(), "make_label: length mismatch");
  for (std::size_t n = 0; n < x.size(); ++n)
    if (std::abs(std::abs(x[n]) - 1.0) > 1e-9)
      throw std::invalid_argument("make_label: pilot entry " + std::to_string(n) + " is not unit modulus");
  CVec label = plan.forward(r);
  for (std::size_t n = 0; n < label.size(); ++n) label[n] *= std::conj(x[n]);
  return label;
}

/// Supervised pairs for one (user, antenna): rows are [Re x; Im x] -> [Re label; Im label].
struct TrainingSet {
  std::size_t user = 0;
  std::size_t antenna = 0;
  Mat inputs;
  Mat labels;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
};

inline void set_row(Mat& m, Eigen::Index row, const RealVec& v) {
  for (std::size_t i = 0; i < v.size(); ++i) m(row, static_cast<Eigen::Index>(i)) = v[i];
}

/// One pair per pilot of user k at antenna m, in pilot order. Labels are divided by label_gain.
inline TrainingSet build_training_set(std::span<const sim::QuantizedRxBlock> blocks, const sim::PilotBook& book,
                                      std::size_t k, std::size_t m, const DftPlan& plan, double label_gain = 1.0) {
  require_dims(k < book.users, "build_training_set: user out of range");
  const std::size_t nt = book.pilots_per_user;
  const std::size_t nf = plan.size();
  TrainingSet ts{k, m, Mat(nt, 2 * nf), Mat(nt, 2 * nf)};
  std::vector<bool> seen(nt, false);
  for (const auto& b : blocks) {
    if (b.user != k) continue;
    require_dims(m < b.R.cols() && b.R.rows() == nf, "build_training_set: receive block shape mismatch");
    const CVec& x = book.pilot(k, b.pilot);
    CVec label = make_label(plan, b.R.column(m), x);
    for (auto& z : label) z /= label_gain;
    const auto row = static_cast<Eigen::Index>(b.pilot);
    set_row(ts.inputs, row, to_real(x));
    set_row(ts.labels, row, to_real(label));
    seen[b.pilot] = true;
  }
  for (std::size_t p = 0; p < nt; ++p)
    if (!seen[p])
      throw std::invalid_argument("build_training_set: user " + std::to_string(k) + " is missing pilot slot " +
                                  std::to_string(book.slot[k][p]));
  return ts;
}

}  // namespace onebit::stage1
