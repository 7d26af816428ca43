#pragma once

#include <array>
#include <optional>
#include <string>
#include <variant>

#include "fire/image.hpp"
#include "fire/linear_op.hpp"
#include "fire/rng.hpp"

namespace fire {

/// Quantisation-only JPEG: 8x8 block DCT, standard luminance table scaled by
/// the IJG quality law, rounding, inverse DCT, clamp. No entropy coding and
/// no chroma subsampling; every channel uses the luminance table.
struct JpegSurrogate {
  int quality = 75;
};

/// The 8x8 step table actually used at `quality`, row-major.
std::array<int, 64> jpeg_quant_table(int quality);
Image jpeg_surrogate(const Image& x, int quality);

class NonLinearError : public Error {
 public:
  using Error::Error;
};

enum class Family { additive_noise, blur, decimation, mask, jpeg, composite };

std::string to_string(Family f);
Family family_from_string(const std::string& s);
/// The family an operator belongs to when used as a fixed degradation.
Family family_of(const LinearOp& op);

/// One sampled pair (H, w): D(x) = H x + w with w ~ N(0, sigma^2 I).
class Degradation {
 public:
  using Op = std::variant<LinearOp, JpegSurrogate>;

  Degradation() = default;
  Degradation(Op op, double noise_sigma);

  const Op& op() const { return op_; }
  double noise_sigma() const { return noise_sigma_; }
  bool is_linear() const { return std::holds_alternative<LinearOp>(op_); }
  /// Throws NonLinearError for the JPEG surrogate.
  const LinearOp& linear() const;
  Family family() const;

  /// H x only.
  Image forward(const Image& x) const;
  /// H x + w. No draws are made when sigma is zero.
  Image apply(const Image& x, Rng& rng) const;
  Image adjoint(const Image& y) const;

  Degradation without_noise() const { return {op_, 0.0}; }
  std::string describe() const;

 private:
  Op op_ = LinearOp::identity();
  double noise_sigma_ = 0.0;
};

/// Closed interval for uniform sampling.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  static Range point(double v) { return {v, v}; }
  double mid() const { return 0.5 * (lo + hi); }
  bool operator==(const Range&) const = default;
};

/// A class of degradations (the distribution over (H, w) pairs).
struct DegradationSpec {
  Family family = Family::additive_noise;
  Range noise_sigma;
  Range blur_sigma{1.0, 1.0};
  std::size_t factor = 2;
  Range drop_prob{0.5, 0.5};
  std::optional<Image> fixed_mask;
  Range quality{75, 75};
  /// Set for fixed(H, sigma); `family` then reflects H's kind.
  std::optional<LinearOp> fixed_op;

  static DegradationSpec additive_noise(Range sigma);
  static DegradationSpec blur(Range blur_sigma, Range sigma);
  static DegradationSpec decimation(std::size_t factor, Range sigma);
  static DegradationSpec random_mask(Range drop_prob, Range sigma);
  static DegradationSpec mask(Image fixed_mask, Range sigma);
  static DegradationSpec jpeg(Range quality, Range sigma);
  static DegradationSpec fixed(LinearOp op, double sigma);

  bool is_fixed() const { return fixed_op.has_value(); }
  /// Throws on empty or negative ranges.
  void validate() const;
  std::string describe() const;
};

/// Draw one degradation for images of shape `shape` (mask maps need it).
Degradation sample(const DegradationSpec& spec, const Shape& shape, Rng& rng);

}  // namespace fire
