#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "fire/image.hpp"
#include "fire/kernel.hpp"

namespace fire::fourier {

using Spectrum = std::vector<std::complex<double>>;

/// Unnormalised forward 2-D DFT of one real plane (height x width, row-major).
Spectrum fft2(std::span<const double> plane, std::size_t height, std::size_t width);
/// Inverse 2-D DFT (includes the 1/(h*w) factor), real part only.
std::vector<double> ifft2_real(const Spectrum& spec, std::size_t height, std::size_t width);

/// Transfer function of periodic convolution with `k` on an h x w grid.
Spectrum transfer(const Kernel& k, std::size_t height, std::size_t width);

/// Channel-wise periodic convolution computed in the Fourier domain.
Image convolve_fft(const Image& x, const Kernel& k);

/// Per-channel x -> F^-1[ filter * F[x] ]. The filter has h*w entries.
Image apply_filter(const Image& x, const Spectrum& filter);

/// Orthonormal 2-D DCT-II and its inverse on a plane.
std::vector<double> dct2(std::span<const double> plane, std::size_t height, std::size_t width);
std::vector<double> idct2(std::span<const double> coeffs, std::size_t height, std::size_t width);

}  // namespace fire::fourier
