#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>

#include "fire/degradation.hpp"
#include "fire/image.hpp"
#include "fire/kernel.hpp"

namespace fire {

// ---------------------------------------------------------------------------
// Classical restoration operators. Each works on a degraded image and
// returns an estimate of the clean image, clamped to [0,1].
// ---------------------------------------------------------------------------

/// x = F^-1[ conj(K) Y / (|K|^2 + 1/snr) ], clamped.
Image wiener_deconv(const Image& y, const Kernel& kernel, double snr);
/// Same filter without the clamp (the linear part).
Image wiener_filter(const Image& y, const Kernel& kernel, double snr);

/// Approximate prox of strength*TV (isotropic, Neumann boundary) using the
/// dual projection iteration with step 1/8, started from p = 0.
Image tv_denoise(const Image& y, double strength, std::size_t inner_iters);
/// tv_denoise without the final clamp.
Image tv_prox(const Image& y, double strength, std::size_t inner_iters);

/// Global orthonormal DCT, soft-threshold of every non-DC coefficient,
/// inverse DCT, clamp.
Image dct_threshold(const Image& y, double threshold);
Image dct_shrink(const Image& y, double threshold);

struct InpaintStats {
  std::size_t sweeps = 0;
  double residual = 0.0;
};

/// Observed pixels (mask > 0.5) are copied; missing ones solve the periodic
/// discrete Laplace equation by Gauss-Seidel until the largest Laplacian
/// residual is <= tol or `inner_iters` sweeps have run.
Image harmonic_inpaint(const Image& y, const Image& mask, std::size_t inner_iters,
                       double tol = 1e-6, InpaintStats* stats = nullptr);

/// Zero-fill upsample, normalised Gaussian interpolation (sigma = factor/2),
/// then a Wiener pass against the decimation anti-alias kernel rescaled to
/// unit DC gain; clamp.
Image sr_upsample(const Image& y, std::size_t factor, double snr = 100.0);
/// Zero-fill upsample followed by normalised Gaussian interpolation.
Image interpolate_upsample(const Image& y, std::size_t factor);

// ---------------------------------------------------------------------------
// Closed convex sets with exact Euclidean projections.
// ---------------------------------------------------------------------------

struct BoxSet {
  double lower = 0.0;
  double upper = 1.0;
};

/// Ball of given radius around a constant image (or an explicit centre).
struct BallSet {
  double center_value = 0.0;
  std::optional<Image> center;
  double radius = 1.0;
};

/// {x : <normal, x> = offset}. Without a normal, the all-ones vector is used,
/// i.e. the set of images with sum equal to offset.
struct HyperplaneSet {
  std::optional<Image> normal;
  double offset = 0.0;
};

class ConvexSet {
 public:
  using Variant = std::variant<BoxSet, BallSet, HyperplaneSet>;

  explicit ConvexSet(Variant set);
  static ConvexSet box(double lower, double upper);
  static ConvexSet ball(double center_value, double radius);
  static ConvexSet ball(Image center, double radius);
  static ConvexSet hyperplane(Image normal, double offset);
  static ConvexSet sum_constraint(double total);

  Image project(const Image& x) const;
  double distance(const Image& x) const;
  double squared_distance(const Image& x) const;
  const Variant& variant() const { return set_; }
  std::string describe() const;

 private:
  Variant set_;
};

// ---------------------------------------------------------------------------
// Restorer interface: R applied to the output of a sampled degradation.
// ---------------------------------------------------------------------------

class Restorer {
 public:
  virtual ~Restorer() = default;

  /// Restore `degraded`, which was produced by `d`. Restorers that need the
  /// degradation (kernel, mask, factor) read it from `d`.
  virtual Image restore(const Image& degraded, const Degradation& d) const = 0;
  virtual std::set<Family> compatible_families() const = 0;
  virtual std::string id() const = 0;

  bool compatible(Family f) const { return compatible_families().contains(f); }
  /// Shape of the clean image for an input of shape `in` produced by `d`.
  Shape output_shape(const Shape& in, const Degradation& d) const;
};

using RestorerPtr = std::shared_ptr<const Restorer>;

class WienerRestorer final : public Restorer {
 public:
  explicit WienerRestorer(double snr);
  Image restore(const Image& degraded, const Degradation& d) const override;
  std::set<Family> compatible_families() const override { return {Family::blur}; }
  std::string id() const override { return "wiener"; }
  double snr() const { return snr_; }

 private:
  double snr_;
};

/// TV denoiser. The effective strength is strength + sigma_gain * sigma, where
/// sigma is the noise level of the degradation it is paired with.
class TvRestorer final : public Restorer {
 public:
  TvRestorer(double strength, std::size_t inner_iters, double sigma_gain = 0.0);
  Image restore(const Image& degraded, const Degradation& d) const override;
  std::set<Family> compatible_families() const override {
    return {Family::additive_noise, Family::jpeg};
  }
  std::string id() const override { return "tv"; }

 private:
  double strength_;
  std::size_t inner_iters_;
  double sigma_gain_;
};

class DctRestorer final : public Restorer {
 public:
  explicit DctRestorer(double threshold, double sigma_gain = 0.0);
  Image restore(const Image& degraded, const Degradation& d) const override;
  std::set<Family> compatible_families() const override {
    return {Family::additive_noise, Family::jpeg};
  }
  std::string id() const override { return "dct"; }

 private:
  double threshold_;
  double sigma_gain_;
};

class InpaintRestorer final : public Restorer {
 public:
  explicit InpaintRestorer(std::size_t inner_iters = 500);
  Image restore(const Image& degraded, const Degradation& d) const override;
  std::set<Family> compatible_families() const override { return {Family::mask}; }
  std::string id() const override { return "inpaint"; }

 private:
  std::size_t inner_iters_;
};

class SrRestorer final : public Restorer {
 public:
  explicit SrRestorer(std::size_t factor, double snr = 100.0);
  Image restore(const Image& degraded, const Degradation& d) const override;
  std::set<Family> compatible_families() const override { return {Family::decimation}; }
  std::string id() const override { return "sr" + std::to_string(factor_); }

 private:
  std::size_t factor_;
  double snr_;
};

/// Exact Euclidean projection. Unlike the image-domain restorers it does not
/// clamp, so that it stays a projection for every convex set.
class ProjectionRestorer final : public Restorer {
 public:
  explicit ProjectionRestorer(ConvexSet set);
  Image restore(const Image& degraded, const Degradation& d) const override;
  std::set<Family> compatible_families() const override { return {Family::additive_noise}; }
  std::string id() const override;
  const ConvexSet& set() const { return set_; }

 private:
  ConvexSet set_;
};

RestorerPtr projection_restorer(ConvexSet set);

/// One weighted term of the prior: a restorer, the degradation class it is
/// paired with, and its weight.
struct PriorTerm {
  RestorerPtr restorer;
  DegradationSpec spec;
  double gamma = 0.0;
  std::string name;

  /// Throws if the restorer cannot handle the degradation family or gamma is
  /// outside [0,1].
  void validate() const;
};

PriorTerm make_prior(RestorerPtr restorer, DegradationSpec spec, double gamma,
                     std::string name = {});

}  // namespace fire
