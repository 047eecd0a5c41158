#pragma once

// Kernels over real grids stored as (positions x channels), position = f * time + t.
// Shared by the standalone layer primitives and the gradient tape.

#include <algorithm>
#include <array>
#include <cmath>

#include "onebit/numerics/types.hpp"

namespace onebit::kernels {

/// One output tap of 2x bilinear upsampling along an axis of length n
/// (half-pixel centres, source coordinate clamped to the valid range).
struct LerpTap {
  std::size_t lo;
  std::size_t hi;
  double w_lo;
  double w_hi;
};

inline LerpTap upsample_tap(std::size_t out_index, std::size_t n) {
  double src = (static_cast<double>(out_index) + 0.5) / 2.0 - 0.5;
  src = std::max(src, 0.0);
  auto lo = static_cast<std::size_t>(std::floor(src));
  lo = std::min(lo, n - 1);
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double w_hi = (hi == lo) ? 0.0 : src - static_cast<double>(lo);
  return {lo, hi, 1.0 - w_hi, w_hi};
}

inline Mat upsample2x(const Mat& in, std::size_t freq, std::size_t time) {
  require_dims(static_cast<std::size_t>(in.rows()) == freq * time, "upsample: row count != freq*time");
  const std::size_t f2 = 2 * freq, t2 = 2 * time;
  Mat out = Mat::Zero(static_cast<Eigen::Index>(f2 * t2), in.cols());
  for (std::size_t fo = 0; fo < f2; ++fo) {
    const LerpTap tf = upsample_tap(fo, freq);
    for (std::size_t to = 0; to < t2; ++to) {
      const LerpTap tt = upsample_tap(to, time);
      const std::array<std::size_t, 2> fi{tf.lo, tf.hi};
      const std::array<double, 2> wf{tf.w_lo, tf.w_hi};
      const std::array<std::size_t, 2> ti{tt.lo, tt.hi};
      const std::array<double, 2> wt{tt.w_lo, tt.w_hi};
      auto row = out.row(static_cast<Eigen::Index>(fo * t2 + to));
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const double w = wf[a] * wt[b];
          if (w != 0.0) row += w * in.row(static_cast<Eigen::Index>(fi[a] * time + ti[b]));
        }
    }
  }
  return out;
}

/// Adjoint of upsample2x: scatters output gradients back onto the source grid.
inline Mat upsample2x_adjoint(const Mat& grad_out, std::size_t freq, std::size_t time) {
  const std::size_t f2 = 2 * freq, t2 = 2 * time;
  require_dims(static_cast<std::size_t>(grad_out.rows()) == f2 * t2, "upsample adjoint: shape mismatch");
  Mat g = Mat::Zero(static_cast<Eigen::Index>(freq * time), grad_out.cols());
  for (std::size_t fo = 0; fo < f2; ++fo) {
    const LerpTap tf = upsample_tap(fo, freq);
    for (std::size_t to = 0; to < t2; ++to) {
      const LerpTap tt = upsample_tap(to, time);
      const std::array<std::size_t, 2> fi{tf.lo, tf.hi};
      const std::array<double, 2> wf{tf.w_lo, tf.w_hi};
      const std::array<std::size_t, 2> ti{tt.lo, tt.hi};
      const std::array<double, 2> wt{tt.w_lo, tt.w_hi};
      const auto row = grad_out.row(static_cast<Eigen::Index>(fo * t2 + to));
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const double w = wf[a] * wt[b];
          if (w != 0.0) g.row(static_cast<Eigen::Index>(fi[a] * time + ti[b])) += w * row;
        }
    }
  }
  return g;
}

inline constexpr double kBatchNormEps = 1e-5;

/// Per-channel normalization over all positions, then y = scale * x_hat + shift.
/// Fills normalized (x_hat) and inv_std (1 x C). Variance is the biased (population) estimate.
inline Mat batch_norm(const Mat& x, const Mat& scale, const Mat& shift, Mat& normalized, Mat& inv_std,
                      double eps = kBatchNormEps) {
  require_dims(scale.rows() == 1 && shift.rows() == 1 && scale.cols() == x.cols() && shift.cols() == x.cols(),
               "batch_norm: scale/shift must be 1 x channels");
  const double n = static_cast<double>(x.rows());
  const Mat mean = x.colwise().sum() / n;
  normalized = x.rowwise() - mean.row(0);
  const Mat var = normalized.array().square().colwise().sum() / n;
  inv_std = (var.array() + eps).rsqrt();
  normalized = normalized.array().rowwise() * inv_std.row(0).array();
  Mat out = normalized.array().rowwise() * scale.row(0).array();
  out.rowwise() += shift.row(0);
  return out;
}

}  // namespace onebit::kernels
