#include "fire/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace fire {
namespace {

constexpr std::array<int, 64> kLuminance = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

// Orthonormal 8-point DCT-II basis: basis[u][n].
const std::array<std::array<double, 8>, 8>& dct8_basis() {
  static const auto basis = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int u = 0; u < 8; ++u) {
      const double s = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) b[u][n] = s * std::cos(std::numbers::pi * (n + 0.5) * u / 8.0);
    }
    return b;
  }();
  return basis;
}

void check_range(const Range& r, const char* name, bool nonneg = true) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi)) throw Error(std::string(name) + " range is not finite");
  if (r.lo > r.hi) throw Error(std::string(name) + " range is empty");
  if (nonneg && r.lo < 0.0) throw Error(std::string(name) + " range must be non-negative");
}

double draw(const Range& r, Rng& rng) { return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi); }

std::string range_str(const Range& r) {
  std::ostringstream os;
  os << "[" << r.lo << "," << r.hi << "]";
  return os.str();
}

}  // namespace

std::array<int, 64> jpeg_quant_table(int quality) {
  if (quality < 1 || quality > 100) throw Error("jpeg quality must be in [1,100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> q{};
  for (std::size_t i = 0; i < 64; ++i) q[i] = std::max(1, (kLuminance[i] * scale + 50) / 100);
  return q;
}

Image jpeg_surrogate(const Image& x, int quality) {
  const auto table = jpeg_quant_table(quality);
  const auto& basis = dct8_basis();
  const std::size_t h = x.height(), w = x.width();
  const std::size_t ph = (h + 7) / 8 * 8, pw = (w + 7) / 8 * 8;
  Image out(x.shape());

  std::vector<double> plane(ph * pw);
  for (std::size_t ch = 0; ch < x.channels(); ++ch) {
    // Edge-replicate into the padded plane, in the 8-bit level-shifted domain.
    for (std::size_t i = 0; i < ph; ++i)
      for (std::size_t j = 0; j < pw; ++j)
        plane[i * pw + j] = 255.0 * x.at(std::min(i, h - 1), std::min(j, w - 1), ch) - 128.0;

    for (std::size_t bi = 0; bi < ph; bi += 8) {
      for (std::size_t bj = 0; bj < pw; bj += 8) {
        double block[8][8], tmp[8][8], coef[8][8];
        for (int r = 0; r < 8; ++r)
          for (int c = 0; c < 8; ++c) block[r][c] = plane[(bi + r) * pw + bj + c];
        // Rows then columns.
        for (int r = 0; r < 8; ++r)
          for (int v = 0; v < 8; ++v) {
            double s = 0;
            for (int c = 0; c < 8; ++c) s += basis[v][c] * block[r][c];
            tmp[r][v] = s;
          }
        for (int u = 0; u < 8; ++u)
          for (int v = 0; v < 8; ++v) {
            double s = 0;
            for (int r = 0; r < 8; ++r) s += basis[u][r] * tmp[r][v];
            const double q = table[u * 8 + v];
            coef[u][v] = std::round(s / q) * q;
          }
        for (int r = 0; r < 8; ++r)
          for (int v = 0; v < 8; ++v) {
            double s = 0;
            for (int u = 0; u < 8; ++u) s += basis[u][r] * coef[u][v];
            tmp[r][v] = s;
          }
        for (int r = 0; r < 8; ++r)
          for (int c = 0; c < 8; ++c) {
            double s = 0;
            for (int v = 0; v < 8; ++v) s += basis[v][c] * tmp[r][v];
            plane[(bi + r) * pw + bj + c] = s;
          }
      }
    }
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j)
        out.at(i, j, ch) = std::clamp((plane[i * pw + j] + 128.0) / 255.0, 0.0, 1.0);
  }
  return out;
}

std::string to_string(Family f) {
  switch (f) {
    case Family::additive_noise: return "additive_noise";
    case Family::blur: return "blur";
    case Family::decimation: return "decimation";
    case Family::mask: return "mask";
    case Family::jpeg: return "jpeg";
    case Family::composite: return "composite";
  }
  return "unknown";
}

Family family_from_string(const std::string& s) {
  if (s == "additive_noise" || s == "noise" || s == "denoise") return Family::additive_noise;
  if (s == "blur") return Family::blur;
  if (s == "decimation" || s == "sr") return Family::decimation;
  if (s == "mask" || s == "inpaint") return Family::mask;
  if (s == "jpeg") return Family::jpeg;
  if (s == "composite") return Family::composite;
  throw Error("unknown degradation family '" + s + "'");
}

Family family_of(const LinearOp& op) {
  switch (op.kind()) {
    case OpKind::identity: return Family::additive_noise;
    case OpKind::convolution: return Family::blur;
    case OpKind::decimation: return Family::decimation;
    case OpKind::mask: return Family::mask;
    case OpKind::composition: return Family::composite;
  }
  return Family::composite;
}

// ---------------------------------------------------------------- Degradation

Degradation::Degradation(Op op, double noise_sigma) : op_(std::move(op)), noise_sigma_(noise_sigma) {
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw Error("noise sigma must be >= 0");
  if (const auto* j = std::get_if<JpegSurrogate>(&op_); j && (j->quality < 1 || j->quality > 100)) {
    throw Error("jpeg quality must be in [1,100]");
  }
}

const LinearOp& Degradation::linear() const {
  if (const auto* op = std::get_if<LinearOp>(&op_)) return *op;
  throw NonLinearError("the JPEG surrogate degradation has no adjoint");
}

Family Degradation::family() const {
  if (const auto* op = std::get_if<LinearOp>(&op_)) return family_of(*op);
  return Family::jpeg;
}

Image Degradation::forward(const Image& x) const {
  if (const auto* op = std::get_if<LinearOp>(&op_)) return op->apply(x);
  return jpeg_surrogate(x, std::get<JpegSurrogate>(op_).quality);
}

Image Degradation::apply(const Image& x, Rng& rng) const {
  Image y = forward(x);
  if (noise_sigma_ > 0.0) {
    for (auto& v : y.values()) v += noise_sigma_ * rng.normal();
  }
  return y;
}

Image Degradation::adjoint(const Image& y) const { return linear().adjoint(y); }

std::string Degradation::describe() const {
  std::ostringstream os;
  if (const auto* op = std::get_if<LinearOp>(&op_)) {
    os << op->describe();
  } else {
    os << "jpeg(q=" << std::get<JpegSurrogate>(op_).quality << ")";
  }
  os << "+N(0," << noise_sigma_ << "^2)";
  return os.str();
}

// ---------------------------------------------------------------- specs

DegradationSpec DegradationSpec::additive_noise(Range sigma) {
  DegradationSpec s;
  s.family = Family::additive_noise;
  s.noise_sigma = sigma;
  s.validate();
  return s;
}

DegradationSpec DegradationSpec::blur(Range blur_sigma, Range sigma) {
  DegradationSpec s;
  s.family = Family::blur;
  s.blur_sigma = blur_sigma;
  s.noise_sigma = sigma;
  s.validate();
  return s;
}

DegradationSpec DegradationSpec::decimation(std::size_t factor, Range sigma) {
  DegradationSpec s;
  s.family = Family::decimation;
  s.factor = factor;
  s.noise_sigma = sigma;
  s.validate();
  return s;
}

DegradationSpec DegradationSpec::random_mask(Range drop_prob, Range sigma) {
  DegradationSpec s;
  s.family = Family::mask;
  s.drop_prob = drop_prob;
  s.noise_sigma = sigma;
  s.validate();
  return s;
}

DegradationSpec DegradationSpec::mask(Image fixed_mask, Range sigma) {
  DegradationSpec s;
  s.family = Family::mask;
  s.fixed_mask = std::move(fixed_mask);
  s.noise_sigma = sigma;
  s.validate();
  return s;
}

DegradationSpec DegradationSpec::jpeg(Range quality, Range sigma) {
  DegradationSpec s;
  s.family = Family::jpeg;
  s.quality = quality;
  s.noise_sigma = sigma;
  s.validate();
  return s;
}

DegradationSpec DegradationSpec::fixed(LinearOp op, double sigma) {
  DegradationSpec s;
  s.family = family_of(op);
  s.fixed_op = std::move(op);
  s.noise_sigma = Range::point(sigma);
  s.validate();
  return s;
}

void DegradationSpec::validate() const {
  check_range(noise_sigma, "noise sigma");
  if (fixed_op) return;
  switch (family) {
    case Family::blur:
      check_range(blur_sigma, "blur sigma");
      if (blur_sigma.lo <= 0.0) throw Error("blur sigma range must be positive");
      break;
    case Family::decimation:
      if (factor < 2) throw Error("decimation factor must be >= 2");
      break;
    case Family::mask:
      if (!fixed_mask) {
        check_range(drop_prob, "drop probability");
        if (drop_prob.hi > 1.0) throw Error("drop probability must be <= 1");
      }
      break;
    case Family::jpeg:
      check_range(quality, "jpeg quality");
      if (quality.lo < 1 || quality.hi > 100) throw Error("jpeg quality range must lie in [1,100]");
      if (std::ceil(quality.lo) > std::floor(quality.hi)) throw Error("jpeg quality range holds no integer");
      break;
    case Family::composite:
      throw Error("composite degradations must be given as fixed operators");
    case Family::additive_noise:
      break;
  }
}

std::string DegradationSpec::describe() const {
  std::ostringstream os;
  if (fixed_op) {
    os << "fixed(" << fixed_op->describe() << ", sigma=" << noise_sigma.lo << ")";
    return os.str();
  }
  os << to_string(family) << "(";
  switch (family) {
    case Family::blur: os << "blur_sigma=" << range_str(blur_sigma) << ", "; break;
    case Family::decimation: os << "factor=" << factor << ", "; break;
    case Family::mask:
      if (fixed_mask) os << "fixed mask, ";
      else os << "p=" << range_str(drop_prob) << ", ";
      break;
    case Family::jpeg: os << "q=" << range_str(quality) << ", "; break;
    default: break;
  }
  os << "sigma=" << range_str(noise_sigma) << ")";
  return os.str();
}

Degradation sample(const DegradationSpec& spec, const Shape& shape, Rng& rng) {
  spec.validate();
  if (spec.fixed_op) return Degradation(*spec.fixed_op, spec.noise_sigma.lo);

  // Operator parameters are drawn before the noise level so that a spec's
  // operator stream does not shift when only its sigma range changes.
  switch (spec.family) {
    case Family::additive_noise:
      return Degradation(LinearOp::identity(), draw(spec.noise_sigma, rng));
    case Family::blur: {
      const double b = draw(spec.blur_sigma, rng);
      return Degradation(LinearOp::gaussian_blur(b), draw(spec.noise_sigma, rng));
    }
    case Family::decimation:
      return Degradation(LinearOp::decimation(spec.factor), draw(spec.noise_sigma, rng));
    case Family::mask: {
      if (spec.fixed_mask) return Degradation(LinearOp::mask(*spec.fixed_mask), draw(spec.noise_sigma, rng));
      const double p = draw(spec.drop_prob, rng);
      Image m(shape.height, shape.width, 1);
      for (auto& v : m.values()) v = rng.uniform() < p ? 0.0 : 1.0;
      return Degradation(LinearOp::mask(std::move(m)), draw(spec.noise_sigma, rng));
    }
    case Family::jpeg: {
      const auto lo = static_cast<std::int64_t>(std::ceil(spec.quality.lo));
      const auto hi = static_cast<std::int64_t>(std::floor(spec.quality.hi));
      const int q = static_cast<int>(rng.uniform_int(lo, hi));
      return Degradation(JpegSurrogate{q}, draw(spec.noise_sigma, rng));
    }
    case Family::composite: break;
  }
  throw Error("cannot sample composite degradation family");
}

}  // namespace fire
