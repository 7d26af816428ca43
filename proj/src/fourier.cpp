#include "fire/fourier.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace fire::fourier {
namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per (kind, h, w) and kept for the
// lifetime of the process.
enum class PlanKind { forward, backward, dct, idct };

struct Buffer {
  explicit Buffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {
    if (!ptr) throw std::bad_alloc();
  }
  ~Buffer() { fftw_free(ptr); }
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
  void* ptr;
};

fftw_plan get_plan(PlanKind kind, std::size_t h, std::size_t w) {
  static std::mutex mutex;
  static std::map<std::tuple<PlanKind, std::size_t, std::size_t>, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto key = std::make_tuple(kind, h, w);
  if (auto it = plans.find(key); it != plans.end()) return it->second;

  const int hi = static_cast<int>(h);
  const int wi = static_cast<int>(w);
  fftw_plan plan = nullptr;
  if (kind == PlanKind::forward || kind == PlanKind::backward) {
    Buffer in(sizeof(fftw_complex) * h * w);
    Buffer out(sizeof(fftw_complex) * h * w);
    plan = fftw_plan_dft_2d(hi, wi, static_cast<fftw_complex*>(in.ptr),
                            static_cast<fftw_complex*>(out.ptr),
                            kind == PlanKind::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                            FFTW_ESTIMATE);
  } else {
    Buffer in(sizeof(double) * h * w);
    Buffer out(sizeof(double) * h * w);
    const fftw_r2r_kind k = kind == PlanKind::dct ? FFTW_REDFT10 : FFTW_REDFT01;
    plan = fftw_plan_r2r_2d(hi, wi, static_cast<double*>(in.ptr), static_cast<double*>(out.ptr),
                            k, k, FFTW_ESTIMATE);
  }
  if (!plan) throw Error("FFTW failed to create a plan");
  plans.emplace(key, plan);
  return plan;
}

Spectrum run_complex(PlanKind kind, const Spectrum& input, std::size_t h, std::size_t w) {
  fftw_plan plan = get_plan(kind, h, w);
  Buffer in(sizeof(fftw_complex) * h * w);
  Buffer out(sizeof(fftw_complex) * h * w);
  auto* pin = static_cast<std::complex<double>*>(in.ptr);
  auto* pout = static_cast<std::complex<double>*>(out.ptr);
  std::copy(input.begin(), input.end(), pin);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(pin), reinterpret_cast<fftw_complex*>(pout));
  return Spectrum(pout, pout + h * w);
}

std::vector<double> run_r2r(PlanKind kind, std::span<const double> input, std::size_t h,
                            std::size_t w) {
  fftw_plan plan = get_plan(kind, h, w);
  Buffer in(sizeof(double) * h * w);
  Buffer out(sizeof(double) * h * w);
  auto* pin = static_cast<double*>(in.ptr);
  auto* pout = static_cast<double*>(out.ptr);
  std::copy(input.begin(), input.end(), pin);
  fftw_execute_r2r(plan, pin, pout);
  return std::vector<double>(pout, pout + h * w);
}

void check_plane(std::size_t n, std::size_t h, std::size_t w) {
  if (n != h * w || h == 0 || w == 0) throw ShapeError("fourier: plane size does not match dims");
}

}  // namespace

Spectrum fft2(std::span<const double> plane, std::size_t height, std::size_t width) {
  check_plane(plane.size(), height, width);
  Spectrum in(plane.begin(), plane.end());
  return run_complex(PlanKind::forward, in, height, width);
}

std::vector<double> ifft2_real(const Spectrum& spec, std::size_t height, std::size_t width) {
  check_plane(spec.size(), height, width);
  Spectrum out = run_complex(PlanKind::backward, spec, height, width);
  const double scale = 1.0 / static_cast<double>(height * width);
  std::vector<double> real(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) real[i] = out[i].real() * scale;
  return real;
}

Spectrum transfer(const Kernel& k, std::size_t height, std::size_t width) {
  // Embed the kernel with its origin at pixel (0,0), wrapping periodically.
  std::vector<double> psf(height * width, 0.0);
  const long cr = static_cast<long>(k.rows / 2);
  const long cc = static_cast<long>(k.cols / 2);
  const long h = static_cast<long>(height);
  const long w = static_cast<long>(width);
  for (std::size_t a = 0; a < k.rows; ++a) {
    for (std::size_t b = 0; b < k.cols; ++b) {
      const long r = ((static_cast<long>(a) - cr) % h + h) % h;
      const long c = ((static_cast<long>(b) - cc) % w + w) % w;
      psf[static_cast<std::size_t>(r * w + c)] += k.at(a, b);
    }
  }
  return fft2(psf, height, width);
}

Image apply_filter(const Image& x, const Spectrum& filter) {
  const std::size_t h = x.height(), w = x.width();
  if (filter.size() != h * w) throw ShapeError("apply_filter: filter size does not match image");
  Image out(x.shape());
  for (std::size_t ch = 0; ch < x.channels(); ++ch) {
    Image plane = x.channel(ch);
    Spectrum s = fft2(plane.values(), h, w);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= filter[i];
    out.set_channel(ch, Image({h, w, 1}, ifft2_real(s, h, w)));
  }
  return out;
}

Image convolve_fft(const Image& x, const Kernel& k) {
  return apply_filter(x, transfer(k, x.height(), x.width()));
}

std::vector<double> dct2(std::span<const double> plane, std::size_t height, std::size_t width) {
  check_plane(plane.size(), height, width);
  std::vector<double> c = run_r2r(PlanKind::dct, plane, height, width);
  // REDFT10 computes 2 sum x cos(...) along each axis; rescale to orthonormal.
  for (std::size_t u = 0; u < height; ++u) {
    const double su = std::sqrt((u == 0 ? 1.0 : 2.0) / static_cast<double>(height)) / 2.0;
    for (std::size_t v = 0; v < width; ++v) {
      const double sv = std::sqrt((v == 0 ? 1.0 : 2.0) / static_cast<double>(width)) / 2.0;
      c[u * width + v] *= su * sv;
    }
  }
  return c;
}

std::vector<double> idct2(std::span<const double> coeffs, std::size_t height, std::size_t width) {
  check_plane(coeffs.size(), height, width);
  // REDFT01 computes X_0 + 2 sum_{k>0} X_k cos(...); prescale accordingly.
  std::vector<double> in(coeffs.begin(), coeffs.end());
  for (std::size_t u = 0; u < height; ++u) {
    const double su = u == 0 ? std::sqrt(1.0 / static_cast<double>(height))
                             : std::sqrt(2.0 / static_cast<double>(height)) / 2.0;
    for (std::size_t v = 0; v < width; ++v) {
      const double sv = v == 0 ? std::sqrt(1.0 / static_cast<double>(width))
                               : std::sqrt(2.0 / static_cast<double>(width)) / 2.0;
      in[u * width + v] *= su * sv;
    }
  }
  return run_r2r(PlanKind::idct, in, height, width);
}

}  // namespace fire::fourier
