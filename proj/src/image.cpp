#include "fire/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fire {

std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.channels);
}

Image::Image(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : Image(Shape{height, width, channels}, fill) {}

Image::Image(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {
  if (shape.channels == 0) throw ShapeError("image must have at least one channel");
}

Image::Image(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     to_string(shape_));
  }
}

void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

Image& Image::operator+=(const Image& other) {
  require_same_shape(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Image& Image::operator-=(const Image& other) {
  require_same_shape(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Image& Image::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

Image& Image::axpy(double s, const Image& other) {
  require_same_shape(*this, other, "axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
  return *this;
}

Image Image::channel(std::size_t ch) const {
  Image plane(shape_.height, shape_.width, 1);
  const std::size_t c = shape_.channels;
  for (std::size_t p = 0; p < shape_.pixels(); ++p) plane.data_[p] = data_[p * c + ch];
  return plane;
}

void Image::set_channel(std::size_t ch, const Image& plane) {
  if (plane.height() != shape_.height || plane.width() != shape_.width || plane.channels() != 1) {
    throw ShapeError("set_channel: plane shape " + to_string(plane.shape()) +
                     " does not fit image " + to_string(shape_));
  }
  const std::size_t c = shape_.channels;
  for (std::size_t p = 0; p < shape_.pixels(); ++p) data_[p * c + ch] = plane.data_[p];
}

Image Image::clamped(double lo, double hi) const {
  Image out = *this;
  for (auto& v : out.data_) v = std::clamp(v, lo, hi);
  return out;
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Image operator+(Image a, const Image& b) { return a += b; }
Image operator-(Image a, const Image& b) { return a -= b; }
Image operator*(double s, Image a) { return a *= s; }

double dot(const Image& a, const Image& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(const Image& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  return std::sqrt(s);
}

double l2_distance(const Image& a, const Image& b) {
  require_same_shape(a, b, "l2_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double mean(const Image& x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.values().begin(), x.values().end(), 0.0) /
         static_cast<double>(x.size());
}

}  // namespace fire
