#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "onebit/numerics/types.hpp"

namespace onebit::bench {

inline constexpr double kNmseFloorDb = -100.0;

/// ||est - truth||_F^2 / ||truth||_F^2.
inline double nmse_linear(const CMatrix& est, const CMatrix& truth) {
  require_dims(est.rows() == truth.rows() && est.cols() == truth.cols(), "nmse: shape mismatch");
  const double denom = truth.frobenius_sq();
  if (!(denom > 0.0)) throw std::invalid_argument("nmse: reference channel is zero");
  double err = 0.0;
  for (std::size_t i = 0; i < est.data().size(); ++i) err += std::norm(est.data()[i] - truth.data()[i]);
  return err / denom;
}

inline double to_db_floored(double ratio) {
  if (!(ratio > 0.0)) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(ratio));
}

inline double nmse_db(const CMatrix& est, const CMatrix& truth) { return to_db_floored(nmse_linear(est, truth)); }

}  // namespace onebit::bench
