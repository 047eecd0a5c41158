#pragma once

#include <array>
#include <cmath>
#include <span>

#include "onebit/numerics/rng.hpp"
#include "onebit/numerics/types.hpp"

namespace onebit::stage1 {

/// Fully connected net: in -> hidden1 (ReLU) -> hidden2 (ReLU) -> out (linear).
/// weights[i] is (out_i x in_i); biases[i] is (1 x out_i).
struct MlpModel {
  std::array<Mat, 3> weights;
  std::array<Mat, 3> biases;

  static MlpModel zeros(std::size_t in, std::size_t hidden1, std::size_t hidden2, std::size_t out) {
    MlpModel m;
    const std::array<std::size_t, 4> w{in, hidden1, hidden2, out};
    for (std::size_t i = 0; i < 3; ++i) {
      m.weights[i] = Mat::Zero(static_cast<Eigen::Index>(w[i + 1]), static_cast<Eigen::Index>(w[i]));
      m.biases[i] = Mat::Zero(1, static_cast<Eigen::Index>(w[i + 1]));
    }
    return m;
  }

  /// Layer widths 2N_f -> 4N_f -> 4N_f -> 2N_f.
  static MlpModel for_subcarriers(std::size_t nf) { return zeros(2 * nf, 4 * nf, 4 * nf, 2 * nf); }

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero. Draw order: layer, row, column.
  void glorot_init(Rng& rng) {
    for (auto& w : weights) {
      const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    }
    for (auto& b : biases) b.setZero();
  }

  std::size_t input_size() const { return static_cast<std::size_t>(weights[0].cols()); }
  std::size_t output_size() const { return static_cast<std::size_t>(weights[2].rows()); }

  /// Weight-matrix elements only; 32 N_f^2 for the for_subcarriers shape.
  std::size_t weight_count() const {
    std::size_t n = 0;
    for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
    return n;
  }

  std::size_t bias_count() const {
    std::size_t n = 0;
    for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
    return n;
  }

  friend bool operator==(const MlpModel& a, const MlpModel& b) {
    for (std::size_t i = 0; i < 3; ++i)
      if (a.weights[i] != b.weights[i] || a.biases[i] != b.biases[i]) return false;
    return true;
  }
};

/// Rows of x are independent inputs.
inline Mat mlp_forward_batch(const MlpModel& model, const Mat& x) {
  require_dims(static_cast<std::size_t>(x.cols()) == model.input_size(), "mlp_forward: input width mismatch");
  Mat h = x;
  for (std::size_t i = 0; i < 3; ++i) {
    Mat next = h * model.weights[i].transpose();
    next.rowwise() += model.biases[i].row(0);
    if (i < 2) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return h;
}

inline RealVec mlp_forward(const MlpModel& model, std::span<const double> x) {
  require_dims(x.size() == model.input_size(), "mlp_forward: input length mismatch");
  Mat in(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) in(0, static_cast<Eigen::Index>(i)) = x[i];
  const Mat out = mlp_forward_batch(model, in);
  return RealVec(out.data(), out.data() + out.size());
}

}  // namespace onebit::stage1
