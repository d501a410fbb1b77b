#include "edgpat/time_encoding.hpp"

#include <cmath>

namespace edgpat {

Vec encode_interval(double dt, const Mat& w, const Mat& b) {
  if (dt < 0)
    throw NumericError("encode_interval: negative interval (replay order bug?): dt=" +
                       std::to_string(dt));
  const int half = static_cast<int>(w.rows());
  const double norm = std::sqrt(1.0 / static_cast<double>(half));
  Vec out(2 * half);
  for (int r = 0; r < half; ++r) {
    const double theta = w(r, 0) * dt + b(r, 0);
    out(2 * r) = norm * std::cos(theta);
    out(2 * r + 1) = norm * std::sin(theta);
  }
  return out;
}

void init_time_encoder(ad::Tensor& w, ad::Tensor& b) {
  const int half = static_cast<int>(w.value.rows());
  for (int r = 0; r < half; ++r)
    w.value(r, 0) = std::pow(10.0, -9.0 * static_cast<double>(r + 1) / half);
  b.value.setZero();
}

}  // namespace edgpat
