#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace fire {

/// Small 2-D filter. The origin sits at (rows/2, cols/2).
struct Kernel {
  std::size_t rows = 1;
  std::size_t cols = 1;
  std::vector<double> taps{1.0};

  double at(std::size_t r, std::size_t c) const { return taps[r * cols + c]; }
  double sum() const;
  static Kernel delta();
  bool operator==(const Kernel&) const = default;
};

/// Separable Gaussian with samples exp(-r^2 / (2 sigma^2)), normalised to
/// unit sum. `size` must be odd and positive; sigma must be positive.
Kernel gaussian_kernel(double sigma, std::size_t size);

/// Odd support wide enough for a Gaussian of this width: 2*ceil(3 sigma) + 1.
std::size_t gaussian_support(double sigma);

/// Plain-text matrix: one row per line, space-separated reals.
Kernel read_kernel_text(const std::filesystem::path& path);
void write_kernel_text(const std::filesystem::path& path, const Kernel& k);

}  // namespace fire
