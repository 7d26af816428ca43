#include "fire/linear_op.hpp"

#include <sstream>

namespace fire {
namespace {

// Above this many taps the Fourier route is cheaper than the direct loop.
constexpr std::size_t kDirectTapLimit = 121;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

long wrap(long i, long n) { return ((i % n) + n) % n; }

Image mask_apply(const MaskOp& m, const Image& x) {
  const Image& mask = m.mask;
  if (mask.height() != x.height() || mask.width() != x.width() ||
      (mask.channels() != 1 && mask.channels() != x.channels())) {
    throw ShapeError("mask " + to_string(mask.shape()) + " does not fit image " +
                     to_string(x.shape()));
  }
  Image out = x;
  const std::size_t c = x.channels();
  for (std::size_t p = 0; p < x.height() * x.width(); ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      out[p * c + ch] *= mask.channels() == 1 ? mask[p] : mask[p * c + ch];
    }
  }
  return out;
}

void check_decimation(const DecimationOp& d, const Shape& s) {
  if (s.height % d.factor != 0 || s.width % d.factor != 0) {
    throw ShapeError("decimation by " + std::to_string(d.factor) + " needs dims divisible by it, got " +
                     to_string(s));
  }
}

}  // namespace

std::string to_string(OpKind kind) {
  switch (kind) {
    case OpKind::identity: return "identity";
    case OpKind::convolution: return "convolution";
    case OpKind::decimation: return "decimation";
    case OpKind::mask: return "mask";
    case OpKind::composition: return "composition";
  }
  return "unknown";
}

Image convolve_periodic(const Image& x, const Kernel& k) {
  if (k.taps.size() > kDirectTapLimit) return fourier::convolve_fft(x, k);
  const long h = static_cast<long>(x.height());
  const long w = static_cast<long>(x.width());
  const std::size_t c = x.channels();
  const long cr = static_cast<long>(k.rows / 2);
  const long cc = static_cast<long>(k.cols / 2);
  Image out(x.shape());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      for (std::size_t a = 0; a < k.rows; ++a) {
        const long r = wrap(i - (static_cast<long>(a) - cr), h);
        for (std::size_t b = 0; b < k.cols; ++b) {
          const double t = k.at(a, b);
          if (t == 0.0) continue;
          const long col = wrap(j - (static_cast<long>(b) - cc), w);
          for (std::size_t ch = 0; ch < c; ++ch) {
            out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), ch) +=
                t * x.at(static_cast<std::size_t>(r), static_cast<std::size_t>(col), ch);
          }
        }
      }
    }
  }
  return out;
}

Image correlate_periodic(const Image& y, const Kernel& k) {
  if (k.taps.size() > kDirectTapLimit) {
    auto filter = fourier::transfer(k, y.height(), y.width());
    for (auto& v : filter) v = std::conj(v);
    return fourier::apply_filter(y, filter);
  }
  const long h = static_cast<long>(y.height());
  const long w = static_cast<long>(y.width());
  const std::size_t c = y.channels();
  const long cr = static_cast<long>(k.rows / 2);
  const long cc = static_cast<long>(k.cols / 2);
  Image out(y.shape());
  for (long i = 0; i < h; ++i) {
    for (long j = 0; j < w; ++j) {
      for (std::size_t a = 0; a < k.rows; ++a) {
        const long r = wrap(i + (static_cast<long>(a) - cr), h);
        for (std::size_t b = 0; b < k.cols; ++b) {
          const double t = k.at(a, b);
          if (t == 0.0) continue;
          const long col = wrap(j + (static_cast<long>(b) - cc), w);
          for (std::size_t ch = 0; ch < c; ++ch) {
            out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j), ch) +=
                t * y.at(static_cast<std::size_t>(r), static_cast<std::size_t>(col), ch);
          }
        }
      }
    }
  }
  return out;
}

Image gaussian_smooth(const Image& x, double sigma) {
  return convolve_periodic(x, gaussian_kernel(sigma, gaussian_support(sigma)));
}

LinearOp::LinearOp(Variant op) : op_(std::move(op)) {
  if (const auto* d = std::get_if<DecimationOp>(&op_); d && d->factor < 1) {
    throw Error("decimation factor must be >= 1");
  }
  if (const auto* m = std::get_if<MaskOp>(&op_)) {
    if (m->mask.empty()) throw Error("mask operator needs a non-empty map");
  }
}

LinearOp LinearOp::identity() { return LinearOp(IdentityOp{}); }

LinearOp LinearOp::convolution(Kernel k) {
  if (k.taps.size() != k.rows * k.cols || k.taps.empty()) throw Error("malformed kernel");
  return LinearOp(ConvolutionOp{std::move(k)});
}

LinearOp LinearOp::gaussian_blur(double sigma) {
  return convolution(gaussian_kernel(sigma, gaussian_support(sigma)));
}

LinearOp LinearOp::decimation(std::size_t factor) {
  if (factor < 1) throw Error("decimation factor must be >= 1");
  const double s = 0.5 * static_cast<double>(factor);
  return LinearOp(DecimationOp{factor, gaussian_kernel(s, gaussian_support(s))});
}

LinearOp LinearOp::mask(Image mask) { return LinearOp(MaskOp{std::move(mask)}); }

LinearOp LinearOp::compose(std::vector<LinearOp> ops) {
  if (ops.empty()) return identity();
  if (ops.size() == 1) return std::move(ops.front());
  return LinearOp(CompositionOp{std::move(ops)});
}

OpKind LinearOp::kind() const { return static_cast<OpKind>(op_.index()); }

Shape LinearOp::output_shape(const Shape& in) const {
  return std::visit(
      Overloaded{
          [&](const DecimationOp& d) {
            check_decimation(d, in);
            return Shape{in.height / d.factor, in.width / d.factor, in.channels};
          },
          [&](const CompositionOp& c) {
            Shape s = in;
            for (const auto& op : c.ops) s = op.output_shape(s);
            return s;
          },
          [&](const auto&) { return in; },
      },
      op_);
}

Shape LinearOp::input_shape(const Shape& out) const {
  return std::visit(
      Overloaded{
          [&](const DecimationOp& d) {
            return Shape{out.height * d.factor, out.width * d.factor, out.channels};
          },
          [&](const CompositionOp& c) {
            Shape s = out;
            for (auto it = c.ops.rbegin(); it != c.ops.rend(); ++it) s = it->input_shape(s);
            return s;
          },
          [&](const auto&) { return out; },
      },
      op_);
}

Image LinearOp::apply(const Image& x) const {
  return std::visit(
      Overloaded{
          [&](const IdentityOp&) { return x; },
          [&](const ConvolutionOp& c) { return convolve_periodic(x, c.kernel); },
          [&](const DecimationOp& d) {
            const Shape out_shape = output_shape(x.shape());
            const Image blurred = convolve_periodic(x, d.antialias);
            Image out(out_shape);
            for (std::size_t i = 0; i < out_shape.height; ++i)
              for (std::size_t j = 0; j < out_shape.width; ++j)
                for (std::size_t ch = 0; ch < out_shape.channels; ++ch)
                  out.at(i, j, ch) = blurred.at(i * d.factor, j * d.factor, ch);
            return out;
          },
          [&](const MaskOp& m) { return mask_apply(m, x); },
          [&](const CompositionOp& c) {
            Image v = x;
            for (const auto& op : c.ops) v = op.apply(v);
            return v;
          },
      },
      op_);
}

Image LinearOp::adjoint(const Image& y) const {
  return std::visit(
      Overloaded{
          [&](const IdentityOp&) { return y; },
          [&](const ConvolutionOp& c) { return correlate_periodic(y, c.kernel); },
          [&](const DecimationOp& d) {
            Image up(y.height() * d.factor, y.width() * d.factor, y.channels());
            for (std::size_t i = 0; i < y.height(); ++i)
              for (std::size_t j = 0; j < y.width(); ++j)
                for (std::size_t ch = 0; ch < y.channels(); ++ch)
                  up.at(i * d.factor, j * d.factor, ch) = y.at(i, j, ch);
            return correlate_periodic(up, d.antialias);
          },
          [&](const MaskOp& m) { return mask_apply(m, y); },
          [&](const CompositionOp& c) {
            Image v = y;
            for (auto it = c.ops.rbegin(); it != c.ops.rend(); ++it) v = it->adjoint(v);
            return v;
          },
      },
      op_);
}

std::optional<fourier::Spectrum> LinearOp::transfer(std::size_t height, std::size_t width) const {
  return std::visit(
      Overloaded{
          [&](const IdentityOp&) -> std::optional<fourier::Spectrum> {
            return fourier::Spectrum(height * width, 1.0);
          },
          [&](const ConvolutionOp& c) -> std::optional<fourier::Spectrum> {
            return fourier::transfer(c.kernel, height, width);
          },
          [&](const CompositionOp& c) -> std::optional<fourier::Spectrum> {
            fourier::Spectrum total(height * width, 1.0);
            for (const auto& op : c.ops) {
              auto t = op.transfer(height, width);
              if (!t) return std::nullopt;
              for (std::size_t i = 0; i < total.size(); ++i) total[i] *= (*t)[i];
            }
            return total;
          },
          [&](const auto&) -> std::optional<fourier::Spectrum> { return std::nullopt; },
      },
      op_);
}

std::string LinearOp::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const IdentityOp&) { os << "identity"; },
                 [&](const ConvolutionOp& c) {
                   os << "convolution(" << c.kernel.rows << "x" << c.kernel.cols << ")";
                 },
                 [&](const DecimationOp& d) { os << "decimation(" << d.factor << ")"; },
                 [&](const MaskOp& m) {
                   os << "mask(observed=" << static_cast<long>(mean(m.mask) * 1000 + 0.5) / 10.0
                      << "%)";
                 },
                 [&](const CompositionOp& c) {
                   os << "compose(";
                   for (std::size_t i = 0; i < c.ops.size(); ++i) os << (i ? "," : "") << c.ops[i].describe();
                   os << ")";
                 },
             },
             op_);
  return os.str();
}

}  // namespace fire
