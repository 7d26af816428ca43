#include "fire/metrics.hpp"

#include <cmath>

#include "fire/kernel.hpp"

namespace fire {

double mse(const Image& x, const Image& ref) {
  require_same_shape(x, ref, "mse");
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - ref[i];
    s += d * d;
  }
  return s / static_cast<double>(x.size());
}

double psnr(const Image& x, const Image& ref, double peak) {
  if (!(peak > 0.0)) throw Error("psnr: peak must be positive");
  const double m = mse(x, ref);
  if (m == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / m);
}

double ssim(const Image& x, const Image& ref, double peak) {
  require_same_shape(x, ref, "ssim");
  constexpr std::size_t kWin = 11;
  if (x.height() < kWin || x.width() < kWin) {
    throw ShapeError("ssim: image " + to_string(x.shape()) + " is smaller than the 11x11 window");
  }
  const Kernel win = gaussian_kernel(1.5, kWin);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const std::size_t rows = x.height() - kWin + 1;
  const std::size_t cols = x.width() - kWin + 1;

  double total = 0.0;
  for (std::size_t ch = 0; ch < x.channels(); ++ch) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (std::size_t a = 0; a < kWin; ++a) {
          for (std::size_t b = 0; b < kWin; ++b) {
            const double w = win.at(a, b);
            const double u = x.at(i + a, j + b, ch);
            const double v = ref.at(i + a, j + b, ch);
            mx += w * u;
            my += w * v;
            sxx += w * u * u;
            syy += w * v * v;
            sxy += w * u * v;
          }
        }
        const double vx = sxx - mx * mx;
        const double vy = syy - my * my;
        const double cov = sxy - mx * my;
        total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                 ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    }
  }
  return total / static_cast<double>(rows * cols * x.channels());
}

}  // namespace fire
