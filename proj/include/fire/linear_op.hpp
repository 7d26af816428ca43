#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fire/fourier.hpp"
#include "fire/image.hpp"
#include "fire/kernel.hpp"

namespace fire {

class LinearOp;

struct IdentityOp {};

/// Periodic (circular) convolution.
struct ConvolutionOp {
  Kernel kernel;
};

/// Anti-alias blur followed by keeping every `factor`-th row and column.
struct DecimationOp {
  std::size_t factor = 2;
  Kernel antialias;
};

/// Pixelwise 0/1 map (height x width, one channel) broadcast over channels.
struct MaskOp {
  Image mask;
};

/// ops[0] is applied first.
struct CompositionOp {
  std::vector<LinearOp> ops;
};

enum class OpKind { identity, convolution, decimation, mask, composition };

std::string to_string(OpKind kind);

/// Linear forward operator A (or H). Immutable value type.
class LinearOp {
 public:
  using Variant = std::variant<IdentityOp, ConvolutionOp, DecimationOp, MaskOp, CompositionOp>;

  LinearOp() : op_(IdentityOp{}) {}
  explicit LinearOp(Variant op);

  static LinearOp identity();
  static LinearOp convolution(Kernel k);
  static LinearOp gaussian_blur(double sigma);
  /// Anti-alias kernel is Gaussian with sigma = 0.5 * factor.
  static LinearOp decimation(std::size_t factor);
  static LinearOp mask(Image mask);
  static LinearOp compose(std::vector<LinearOp> ops);

  OpKind kind() const;
  const Variant& variant() const { return op_; }

  Shape output_shape(const Shape& in) const;
  Shape input_shape(const Shape& out) const;

  Image apply(const Image& x) const;
  Image adjoint(const Image& y) const;

  /// Fourier transfer function on an h x w grid, for kinds diagonalised by
  /// the DFT (identity and convolution).
  std::optional<fourier::Spectrum> transfer(std::size_t height, std::size_t width) const;

  std::string describe() const;

 private:
  Variant op_;
};

/// Direct nested-loop periodic convolution and its adjoint (correlation).
Image convolve_periodic(const Image& x, const Kernel& k);
Image correlate_periodic(const Image& y, const Kernel& k);

/// Periodic Gaussian smoothing with gaussian_kernel(sigma, gaussian_support(sigma)).
/// This is also the reference behaviour of the remote prior server's
/// gaussian mode.
Image gaussian_smooth(const Image& x, double sigma);

}  // namespace fire
