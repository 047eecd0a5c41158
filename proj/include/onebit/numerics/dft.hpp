#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include "onebit/numerics/types.hpp"

namespace onebit {

/// Unitary DFT of fixed size, applied by direct matrix multiply.
/// forward: X_k = (1/sqrt(N)) sum_n x_n exp(-j 2 pi k n / N); inverse uses the conjugate.
class DftPlan {
 public:
  explicit DftPlan(std::size_t n) : n_(n), matrix_(n * n) {
    require_dims(n > 0, "DFT size must be positive");
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        // reduce k*i mod n first so large products keep full phase accuracy
        const double phase = -2.0 * std::numbers::pi * static_cast<double>((k * i) % n) /
                             static_cast<double>(n);
        matrix_[k * n + i] = std::polar(scale, phase);
      }
    }
  }

  std::size_t size() const { return n_; }

  /// Entry (k, i) of the forward matrix F.
  cplx entry(std::size_t k, std::size_t i) const { return matrix_[k * n_ + i]; }

  CVec forward(std::span<const cplx> v) const { return apply(v, false); }
  CVec inverse(std::span<const cplx> v) const { return apply(v, true); }

 private:
  CVec apply(std::span<const cplx> v, bool conjugate) const {
    require_dims(v.size() == n_, "DFT input length " + std::to_string(v.size()) +
                                     " does not match plan size " + std::to_string(n_));
    CVec out(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      cplx acc{};
      for (std::size_t i = 0; i < n_; ++i) {
        // F^H(k, i) = conj(F(i, k)) and F is symmetric
        const cplx w = conjugate ? std::conj(matrix_[k * n_ + i]) : matrix_[k * n_ + i];
        acc += w * v[i];
      }
      out[k] = acc;
    }
    return out;
  }

  std::size_t n_;
  std::vector<cplx> matrix_;
};

inline CVec dft(const DftPlan& plan, std::span<const cplx> v) { return plan.forward(v); }
inline CVec idft(const DftPlan& plan, std::span<const cplx> v) { return plan.inverse(v); }

}  // namespace onebit
