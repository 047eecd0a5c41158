#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "onebit/numerics/types.hpp"

namespace onebit {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One parameter block handed to the optimizer.
struct ParamRef {
  std::string_view name;
  Mat& value;
  const Mat& grad;
};

struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Adaptive-moment optimizer state. Moment buffers are created on the first step and
/// keep the shape of their parameter block from then on.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }
  long step_count() const { return step_; }

  void step(std::span<const ParamRef> blocks) {
    if (first_.empty()) {
      for (const auto& b : blocks) {
        first_.push_back(Mat::Zero(b.value.rows(), b.value.cols()));
        second_.push_back(Mat::Zero(b.value.rows(), b.value.cols()));
      }
    }
    require_dims(blocks.size() == first_.size(), "adam: number of parameter blocks changed");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      require_dims(b.value.rows() == first_[i].rows() && b.value.cols() == first_[i].cols() &&
                       b.grad.rows() == b.value.rows() && b.grad.cols() == b.value.cols(),
                   "adam: shape mismatch in block '" + std::string(b.name) + "'");
      if (!b.grad.allFinite())
        throw NonFiniteGradient("adam: non-finite gradient in parameter block '" + std::string(b.name) + "'");
    }

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      first_[i] = cfg_.beta1 * first_[i] + (1.0 - cfg_.beta1) * b.grad;
      second_[i] = cfg_.beta2 * second_[i] + (1.0 - cfg_.beta2) * b.grad.cwiseAbs2();
      b.value.array() -= cfg_.learning_rate * (first_[i].array() / bc1) /
                         ((second_[i].array() / bc2).sqrt() + cfg_.epsilon);
    }
  }

 private:
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<Mat> first_;
  std::vector<Mat> second_;
};

inline void adam_step(AdamState& state, std::span<const ParamRef> blocks) { state.step(blocks); }

}  // namespace onebit
