#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace onebit {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RealVec = std::vector<double>;

/// Row-major dense real matrix. Grids are stored as (positions x channels).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

/// Dense complex matrix, row-major. Used for N_f x M channel matrices.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  CVec column(std::size_t c) const {
    require_dims(c < cols_, "CMatrix column index out of range");
    CVec out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  void set_column(std::size_t c, const CVec& v) {
    require_dims(c < cols_ && v.size() == rows_, "CMatrix column shape mismatch");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
  }

  double frobenius_sq() const {
    double s = 0.0;
    for (const auto& z : data_) s += std::norm(z);
    return s;
  }

  bool all_finite() const {
    for (const auto& z : data_)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
  }

  const std::vector<cplx>& data() const { return data_; }
  std::vector<cplx>& data() { return data_; }

  friend bool operator==(const CMatrix&, const CMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

/// Complex (freq, time, space) grid.
class ComplexGrid {
 public:
  ComplexGrid() = default;
  ComplexGrid(std::size_t freq, std::size_t time, std::size_t space)
      : freq_(freq), time_(time), space_(space), data_(freq * time * space) {
    require_dims(freq > 0 && time > 0 && space > 0, "grid dims must be positive");
  }

  std::size_t freq() const { return freq_; }
  std::size_t time() const { return time_; }
  std::size_t space() const { return space_; }

  cplx& operator()(std::size_t f, std::size_t t, std::size_t s) {
    return data_[(f * time_ + t) * space_ + s];
  }
  const cplx& operator()(std::size_t f, std::size_t t, std::size_t s) const {
    return data_[(f * time_ + t) * space_ + s];
  }

  double frobenius_sq() const {
    double acc = 0.0;
    for (const auto& z : data_) acc += std::norm(z);
    return acc;
  }

  bool all_finite() const {
    for (const auto& z : data_)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
  }

  friend bool operator==(const ComplexGrid&, const ComplexGrid&) = default;

 private:
  std::size_t freq_ = 0;
  std::size_t time_ = 0;
  std::size_t space_ = 0;
  std::vector<cplx> data_;
};

/// Concatenate real parts then imaginary parts: [Re(v); Im(v)].
inline RealVec to_real(const CVec& v) {
  RealVec out(2 * v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i].real();
    out[i + v.size()] = v[i].imag();
  }
  return out;
}

inline CVec from_real(const RealVec& v) {
  require_dims(v.size() % 2 == 0, "real-packed vector must have even length");
  const std::size_t n = v.size() / 2;
  CVec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {v[i], v[i + n]};
  return out;
}

inline double norm_sq(const CVec& v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return s;
}

}  // namespace onebit

namespace onebit {

/// Raised when a training loss becomes non-finite.
struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(const std::string& what, std::size_t iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"), iteration(iteration) {}
  std::size_t iteration;
};

}  // namespace onebit
