#pragma once

#include "onebit/numerics/grid_kernels.hpp"
#include "onebit/numerics/types.hpp"

namespace onebit::stage2 {

/// Real (freq, time, channel) grid; data is (freq*time x channels), row = f * time + t.
struct RealGrid {
  std::size_t freq = 0;
  std::size_t time = 0;
  Mat data;

  RealGrid() = default;
  RealGrid(std::size_t f, std::size_t t, std::size_t channels)
      : freq(f), time(t), data(Mat::Zero(static_cast<Eigen::Index>(f * t), static_cast<Eigen::Index>(channels))) {
    require_dims(f > 0 && t > 0 && channels > 0, "RealGrid dims must be positive");
  }
  RealGrid(std::size_t f, std::size_t t, Mat d) : freq(f), time(t), data(std::move(d)) {
    require_dims(static_cast<std::size_t>(data.rows()) == f * t, "RealGrid rows != freq*time");
  }

  std::size_t channels() const { return static_cast<std::size_t>(data.cols()); }
  double& operator()(std::size_t f, std::size_t t, std::size_t c) {
    return data(static_cast<Eigen::Index>(f * time + t), static_cast<Eigen::Index>(c));
  }
  double operator()(std::size_t f, std::size_t t, std::size_t c) const {
    return data(static_cast<Eigen::Index>(f * time + t), static_cast<Eigen::Index>(c));
  }
};

/// Doubles freq and time; half-pixel bilinear interpolation with edge clamping.
inline RealGrid upsample_2x_bilinear(const RealGrid& g) {
  return {2 * g.freq, 2 * g.time, kernels::upsample2x(g.data, g.freq, g.time)};
}

/// out[f, t, :] = kernel * g[f, t, :] + bias. kernel is (out x in), bias (1 x out).
inline RealGrid conv_1x1(const RealGrid& g, const Mat& kernel, const Mat& bias) {
  require_dims(kernel.cols() == g.data.cols(), "conv_1x1: kernel columns != input channels");
  require_dims(bias.rows() == 1 && bias.cols() == kernel.rows(), "conv_1x1: bias must be 1 x out");
  Mat out = g.data * kernel.transpose();
  out.rowwise() += bias.row(0);
  return {g.freq, g.time, std::move(out)};
}

inline RealGrid relu(const RealGrid& g) { return {g.freq, g.time, g.data.cwiseMax(0.0)}; }

/// Normalizes each channel over its freq*time positions, then scales and shifts (1 x C each).
inline RealGrid batch_norm(const RealGrid& g, const Mat& scale, const Mat& shift) {
  Mat xhat, inv_std;
  return {g.freq, g.time, kernels::batch_norm(g.data, scale, shift, xhat, inv_std)};
}

}  // namespace onebit::stage2
