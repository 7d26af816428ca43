#pragma once

#include <Eigen/Dense>
#include <functional>

#include "fire/image.hpp"
#include "fire/io.hpp"
#include "fire/linear_op.hpp"
#include "fire/rng.hpp"

namespace fire::testing {

inline Image random_image(const Shape& s, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Image x(s);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo, hi);
  return x;
}

inline Image random_normal(const Shape& s, std::uint64_t seed) {
  Rng rng(seed);
  Image x(s);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  return x;
}

inline Image test_image() { return io::read_image(FIRE_DATA_DIR "/astronaut64.png"); }

inline Eigen::VectorXd vec(const Image& x) {
  return Eigen::Map<const Eigen::VectorXd>(x.values().data(), static_cast<Eigen::Index>(x.size()));
}

inline Image unvec(const Eigen::VectorXd& v, const Shape& s) {
  return Image(s, std::vector<double>(v.data(), v.data() + v.size()));
}

/// Dense matrix of a linear map, one column per basis image.
inline Eigen::MatrixXd dense(const std::function<Image(const Image&)>& f, const Shape& in) {
  Eigen::MatrixXd M;
  for (std::size_t j = 0; j < in.size(); ++j) {
    Image e(in);
    e[j] = 1.0;
    const Image col = f(e);
    if (j == 0) M.resize(static_cast<Eigen::Index>(col.size()), static_cast<Eigen::Index>(in.size()));
    M.col(static_cast<Eigen::Index>(j)) = vec(col);
  }
  return M;
}

inline Eigen::MatrixXd dense(const LinearOp& A, const Shape& in) {
  return dense([&](const Image& x) { return A.apply(x); }, in);
}

inline double rel_error(const Image& a, const Image& b) {
  const double n = l2_norm(b);
  return l2_distance(a, b) / (n > 0.0 ? n : 1.0);
}

}  // namespace fire::testing
