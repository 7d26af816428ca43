#pragma once

#include "fire/image.hpp"

namespace fire {

/// Returned by psnr() when the two images are identical.
inline constexpr double kPsnrIdentical = 100.0;

double mse(const Image& x, const Image& ref);

/// 10*log10(peak^2 / MSE), or kPsnrIdentical when MSE is zero.
double psnr(const Image& x, const Image& ref, double peak = 1.0);

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over
/// valid window positions and channels.
double ssim(const Image& x, const Image& ref, double peak = 1.0);

}  // namespace fire
