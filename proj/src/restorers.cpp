#include "fire/restorers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fire/fourier.hpp"
#include "fire/linear_op.hpp"

namespace fire {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

fourier::Spectrum wiener_response(const fourier::Spectrum& transfer, double snr) {
  const double eps = 1.0 / snr;
  fourier::Spectrum w(transfer.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::conj(transfer[i]) / (std::norm(transfer[i]) + eps);
  return w;
}

// Chambolle's projection iteration on one plane.
std::vector<double> tv_plane(const std::vector<double>& g, std::size_t h, std::size_t w,
                             double strength, std::size_t iters) {
  constexpr double tau = 1.0 / 8.0;
  const std::size_t n = h * w;
  std::vector<double> px(n, 0.0), py(n, 0.0), div(n, 0.0), v(n);

  auto divergence = [&] {
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t k = i * w + j;
        double d = 0.0;
        if (h > 1) {
          if (i == 0) d += px[k];
          else if (i == h - 1) d -= px[k - w];
          else d += px[k] - px[k - w];
        }
        if (w > 1) {
          if (j == 0) d += py[k];
          else if (j == w - 1) d -= py[k - 1];
          else d += py[k] - py[k - 1];
        }
        div[k] = d;
      }
    }
  };

  for (std::size_t it = 0; it < iters; ++it) {
    divergence();
    for (std::size_t k = 0; k < n; ++k) v[k] = div[k] - g[k] / strength;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t k = i * w + j;
        const double gx = i + 1 < h ? v[k + w] - v[k] : 0.0;
        const double gy = j + 1 < w ? v[k + 1] - v[k] : 0.0;
        const double norm = std::sqrt(gx * gx + gy * gy);
        px[k] = (px[k] + tau * gx) / (1.0 + tau * norm);
        py[k] = (py[k] + tau * gy) / (1.0 + tau * norm);
      }
    }
  }
  divergence();
  std::vector<double> u(n);
  for (std::size_t k = 0; k < n; ++k) u[k] = g[k] - strength * div[k];
  return u;
}

template <class PlaneFn>
Image per_channel(const Image& x, PlaneFn&& fn) {
  Image out(x.shape());
  for (std::size_t ch = 0; ch < x.channels(); ++ch) {
    Image plane = x.channel(ch);
    std::vector<double> data(plane.values().begin(), plane.values().end());
    out.set_channel(ch, Image({x.height(), x.width(), 1}, fn(std::move(data))));
  }
  return out;
}

Image zero_fill(const Image& y, std::size_t factor) {
  Image up(y.height() * factor, y.width() * factor, y.channels());
  for (std::size_t i = 0; i < y.height(); ++i)
    for (std::size_t j = 0; j < y.width(); ++j)
      for (std::size_t ch = 0; ch < y.channels(); ++ch) up.at(i * factor, j * factor, ch) = y.at(i, j, ch);
  return up;
}

}  // namespace

// ---------------------------------------------------------------- operations

Image wiener_filter(const Image& y, const Kernel& kernel, double snr) {
  if (!(snr > 0.0)) throw Error("wiener_deconv: snr must be positive");
  return fourier::apply_filter(y, wiener_response(fourier::transfer(kernel, y.height(), y.width()), snr));
}

Image wiener_deconv(const Image& y, const Kernel& kernel, double snr) {
  return wiener_filter(y, kernel, snr).clamped();
}

Image tv_prox(const Image& y, double strength, std::size_t inner_iters) {
  if (strength < 0.0) throw Error("tv_denoise: strength must be >= 0");
  if (strength == 0.0) return y;
  const std::size_t h = y.height(), w = y.width();
  return per_channel(y, [&](std::vector<double> g) { return tv_plane(g, h, w, strength, inner_iters); });
}

Image tv_denoise(const Image& y, double strength, std::size_t inner_iters) {
  if (strength == 0.0) return y;
  return tv_prox(y, strength, inner_iters).clamped();
}

Image dct_shrink(const Image& y, double threshold) {
  if (threshold < 0.0) throw Error("dct_threshold: threshold must be >= 0");
  const std::size_t h = y.height(), w = y.width();
  return per_channel(y, [&](std::vector<double> plane) {
    auto c = fourier::dct2(plane, h, w);
    for (std::size_t k = 1; k < c.size(); ++k) {
      const double a = std::abs(c[k]) - threshold;
      c[k] = a > 0.0 ? std::copysign(a, c[k]) : 0.0;
    }
    return fourier::idct2(c, h, w);
  });
}

Image dct_threshold(const Image& y, double threshold) { return dct_shrink(y, threshold).clamped(); }

Image harmonic_inpaint(const Image& y, const Image& mask, std::size_t inner_iters, double tol,
                       InpaintStats* stats) {
  if (mask.height() != y.height() || mask.width() != y.width()) {
    throw ShapeError("harmonic_inpaint: mask " + to_string(mask.shape()) + " does not fit " +
                     to_string(y.shape()));
  }
  const std::size_t h = y.height(), w = y.width(), c = y.channels();
  auto observed = [&](std::size_t p, std::size_t ch) {
    return (mask.channels() == 1 ? mask[p] : mask[p * c + ch]) > 0.5;
  };

  Image x = y;
  InpaintStats local;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    std::size_t count = 0;
    std::vector<std::size_t> missing;
    for (std::size_t p = 0; p < h * w; ++p) {
      if (observed(p, ch)) {
        sum += y[p * c + ch];
        ++count;
      } else {
        missing.push_back(p);
      }
    }
    if (count == 0) throw Error("harmonic_inpaint: no observed pixel");
    if (missing.empty()) continue;
    const double fill = sum / static_cast<double>(count);
    for (std::size_t p : missing) x[p * c + ch] = fill;

    auto neighbour_mean = [&](std::size_t p) {
      const std::size_t i = p / w, j = p % w;
      const std::size_t up = ((i + h - 1) % h) * w + j;
      const std::size_t down = ((i + 1) % h) * w + j;
      const std::size_t left = i * w + (j + w - 1) % w;
      const std::size_t right = i * w + (j + 1) % w;
      return 0.25 * (x[up * c + ch] + x[down * c + ch] + x[left * c + ch] + x[right * c + ch]);
    };

    std::size_t sweep = 0;
    double residual = 0.0;
    for (; sweep < inner_iters; ++sweep) {
      for (std::size_t p : missing) x[p * c + ch] = neighbour_mean(p);
      residual = 0.0;
      for (std::size_t p : missing) residual = std::max(residual, std::abs(x[p * c + ch] - neighbour_mean(p)));
      if (residual <= tol) {
        ++sweep;
        break;
      }
    }
    local.sweeps = std::max(local.sweeps, sweep);
    local.residual = std::max(local.residual, residual);
  }
  if (stats) *stats = local;
  return x;
}

Image interpolate_upsample(const Image& y, std::size_t factor) {
  if (factor < 2) throw Error("sr_upsample: factor must be >= 2");
  const double sigma = 0.5 * static_cast<double>(factor);
  const Kernel g = gaussian_kernel(sigma, gaussian_support(sigma));
  const Image num = convolve_periodic(zero_fill(y, factor), g);
  const Image den = convolve_periodic(zero_fill(Image(y.height(), y.width(), 1, 1.0), factor), g);
  Image out = num;
  const std::size_t c = y.channels();
  for (std::size_t p = 0; p < den.size(); ++p)
    for (std::size_t ch = 0; ch < c; ++ch) out[p * c + ch] /= den[p];
  return out;
}

Image sr_upsample(const Image& y, std::size_t factor, double snr) {
  if (!(snr > 0.0)) throw Error("sr_upsample: snr must be positive");
  Image up = interpolate_upsample(y, factor);
  const LinearOp dec = LinearOp::decimation(factor);
  const Kernel& aa = std::get<DecimationOp>(dec.variant()).antialias;
  auto response = wiener_response(fourier::transfer(aa, up.height(), up.width()), snr);
  // Unit gain at DC; the anti-alias kernel has K(0) = 1.
  for (auto& v : response) v *= 1.0 + 1.0 / snr;
  return fourier::apply_filter(up, response).clamped();
}

// ---------------------------------------------------------------- convex sets

ConvexSet::ConvexSet(Variant set) : set_(std::move(set)) {
  std::visit(Overloaded{
                 [](const BoxSet& b) {
                   if (b.lower > b.upper) throw Error("box set needs lower <= upper");
                 },
                 [](const BallSet& b) {
                   if (!(b.radius > 0.0)) throw Error("ball radius must be positive");
                 },
                 [](const HyperplaneSet& p) {
                   if (p.normal && l2_norm(*p.normal) == 0.0) throw Error("hyperplane normal must be non-zero");
                 },
             },
             set_);
}

ConvexSet ConvexSet::box(double lower, double upper) { return ConvexSet(BoxSet{lower, upper}); }
ConvexSet ConvexSet::ball(double center_value, double radius) {
  return ConvexSet(BallSet{center_value, std::nullopt, radius});
}
ConvexSet ConvexSet::ball(Image center, double radius) {
  return ConvexSet(BallSet{0.0, std::move(center), radius});
}
ConvexSet ConvexSet::hyperplane(Image normal, double offset) {
  return ConvexSet(HyperplaneSet{std::move(normal), offset});
}
ConvexSet ConvexSet::sum_constraint(double total) { return ConvexSet(HyperplaneSet{std::nullopt, total}); }

Image ConvexSet::project(const Image& x) const {
  return std::visit(
      Overloaded{
          [&](const BoxSet& b) { return x.clamped(b.lower, b.upper); },
          [&](const BallSet& b) {
            Image c = b.center ? *b.center : Image(x.shape(), b.center_value);
            require_same_shape(x, c, "ball projection");
            Image d = x - c;
            const double n = l2_norm(d);
            if (n <= b.radius) return x;
            return c.axpy(b.radius / n, d);
          },
          [&](const HyperplaneSet& p) {
            Image a = p.normal ? *p.normal : Image(x.shape(), 1.0);
            require_same_shape(x, a, "hyperplane projection");
            const double t = (dot(a, x) - p.offset) / dot(a, a);
            Image out = x;
            return out.axpy(-t, a);
          },
      },
      set_);
}

double ConvexSet::squared_distance(const Image& x) const {
  const Image p = project(x);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - p[i]) * (x[i] - p[i]);
  return s;
}

double ConvexSet::distance(const Image& x) const { return std::sqrt(squared_distance(x)); }

std::string ConvexSet::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const BoxSet& b) { os << "box:" << b.lower << ":" << b.upper; },
                 [&](const BallSet& b) {
                   os << "ball:" << (b.center ? std::string("image") : std::to_string(b.center_value)) << ":"
                      << b.radius;
                 },
                 [&](const HyperplaneSet& p) {
                   os << (p.normal ? "hyperplane:" : "sum:") << p.offset;
                 },
             },
             set_);
  return os.str();
}

// ---------------------------------------------------------------- restorers

Shape Restorer::output_shape(const Shape& in, const Degradation& d) const {
  return d.is_linear() ? d.linear().input_shape(in) : in;
}

WienerRestorer::WienerRestorer(double snr) : snr_(snr) {
  if (!(snr > 0.0)) throw Error("wiener restorer: snr must be positive");
}

Image WienerRestorer::restore(const Image& degraded, const Degradation& d) const {
  auto t = d.linear().transfer(degraded.height(), degraded.width());
  if (!t) throw Error("wiener restorer needs a convolution degradation, got " + d.describe());
  return fourier::apply_filter(degraded, wiener_response(*t, snr_)).clamped();
}

TvRestorer::TvRestorer(double strength, std::size_t inner_iters, double sigma_gain)
    : strength_(strength), inner_iters_(inner_iters), sigma_gain_(sigma_gain) {
  if (strength < 0.0 || sigma_gain < 0.0) throw Error("tv restorer: strength must be >= 0");
}

Image TvRestorer::restore(const Image& degraded, const Degradation& d) const {
  return tv_denoise(degraded, strength_ + sigma_gain_ * d.noise_sigma(), inner_iters_);
}

DctRestorer::DctRestorer(double threshold, double sigma_gain) : threshold_(threshold), sigma_gain_(sigma_gain) {
  if (threshold < 0.0 || sigma_gain < 0.0) throw Error("dct restorer: threshold must be >= 0");
}

Image DctRestorer::restore(const Image& degraded, const Degradation& d) const {
  return dct_threshold(degraded, threshold_ + sigma_gain_ * d.noise_sigma());
}

InpaintRestorer::InpaintRestorer(std::size_t inner_iters) : inner_iters_(inner_iters) {}

Image InpaintRestorer::restore(const Image& degraded, const Degradation& d) const {
  const auto* m = std::get_if<MaskOp>(&d.linear().variant());
  if (!m) throw Error("inpaint restorer needs a mask degradation, got " + d.describe());
  return harmonic_inpaint(degraded, m->mask, inner_iters_).clamped();
}

SrRestorer::SrRestorer(std::size_t factor, double snr) : factor_(factor), snr_(snr) {
  if (factor < 2) throw Error("sr restorer: factor must be >= 2");
  if (!(snr > 0.0)) throw Error("sr restorer: snr must be positive");
}

Image SrRestorer::restore(const Image& degraded, const Degradation& d) const {
  const auto* dec = std::get_if<DecimationOp>(&d.linear().variant());
  if (!dec || dec->factor != factor_) {
    throw Error("sr" + std::to_string(factor_) + " restorer needs a matching decimation, got " + d.describe());
  }
  return sr_upsample(degraded, factor_, snr_);
}

ProjectionRestorer::ProjectionRestorer(ConvexSet set) : set_(std::move(set)) {}

Image ProjectionRestorer::restore(const Image& degraded, const Degradation&) const {
  return set_.project(degraded);
}

std::string ProjectionRestorer::id() const { return "proj:" + set_.describe(); }

RestorerPtr projection_restorer(ConvexSet set) {
  return std::make_shared<ProjectionRestorer>(std::move(set));
}

void PriorTerm::validate() const {
  if (!restorer) throw Error("prior term has no restorer");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("prior weight gamma must lie in [0,1]");
  spec.validate();
  const Family f = spec.fixed_op ? family_of(*spec.fixed_op) : spec.family;
  if (!restorer->compatible(f)) {
    throw Error("restorer '" + restorer->id() + "' is not compatible with degradation family " + to_string(f));
  }
}

PriorTerm make_prior(RestorerPtr restorer, DegradationSpec spec, double gamma, std::string name) {
  if (name.empty() && restorer) name = restorer->id();
  PriorTerm t{std::move(restorer), std::move(spec), gamma, std::move(name)};
  t.validate();
  return t;
}

}  // namespace fire
