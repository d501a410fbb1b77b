#include "edgpat/nn.hpp"

#include <cmath>

namespace edgpat {

void xavier_init(ad::Tensor& t, Rng& rng) {
  const double fan_in = static_cast<double>(t.value.cols());
  const double fan_out = static_cast<double>(t.value.rows());
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index r = 0; r < t.value.rows(); ++r)
    for (Eigen::Index c = 0; c < t.value.cols(); ++c) t.value(r, c) = rng.uniform(-a, a);
}

void Mlp::init(Rng& rng) {
  xavier_init(w1, rng);
  xavier_init(w2, rng);
  b1.value.setZero();
  b2.value.setZero();
}

void GruCell::init(Rng& rng) {
  xavier_init(wz, rng);
  xavier_init(uz, rng);
  xavier_init(wr, rng);
  xavier_init(ur, rng);
  xavier_init(wn, rng);
  xavier_init(un, rng);
  bz.value.setZero();
  br.value.setZero();
  bn.value.setZero();
}

}  // namespace edgpat
