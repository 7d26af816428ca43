#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fire {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t pixels() const { return height * width; }
  std::size_t size() const { return height * width * channels; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Real-valued image, row-major and channels-last. Nominal range is [0,1]
/// but arithmetic is unrestricted; only restorers clamp.
class Image {
 public:
  Image() = default;
  Image(std::size_t height, std::size_t width, std::size_t channels = 1, double fill = 0.0);
  explicit Image(Shape shape, double fill = 0.0);
  Image(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t row, std::size_t col, std::size_t ch = 0) {
    return data_[(row * shape_.width + col) * shape_.channels + ch];
  }
  double at(std::size_t row, std::size_t col, std::size_t ch = 0) const {
    return data_[(row * shape_.width + col) * shape_.channels + ch];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  Image& operator+=(const Image& other);
  Image& operator-=(const Image& other);
  Image& operator*=(double s);
  /// this += s * other
  Image& axpy(double s, const Image& other);

  /// Single channel copy (plane) and its inverse.
  Image channel(std::size_t ch) const;
  void set_channel(std::size_t ch, const Image& plane);

  Image clamped(double lo = 0.0, double hi = 1.0) const;
  bool all_finite() const;

  bool operator==(const Image&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Image operator+(Image a, const Image& b);
Image operator-(Image a, const Image& b);
Image operator*(double s, Image a);

void require_same_shape(const Image& a, const Image& b, const char* what);

double dot(const Image& a, const Image& b);
double l2_norm(const Image& x);
double l2_distance(const Image& a, const Image& b);
double max_abs_diff(const Image& a, const Image& b);
double mean(const Image& x);

}  // namespace fire
