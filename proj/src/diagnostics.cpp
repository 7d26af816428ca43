#include "fire/diagnostics.hpp"

#include <cmath>
#include <cstdio>

#include "fire/linear_op.hpp"
#include "fire/metrics.hpp"

namespace fire {
namespace {

Image apply_term(const Image& x, const PriorTerm& term, bool compose, Rng& rng) {
  const Degradation d = sample(term.spec, x.shape(), rng);
  const Image z = compose ? d.apply(x, rng) : x;
  Image out = term.restorer->restore(z, d);
  require_same_shape(out, x, "restorer output");
  return out;
}

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<double> fixed_point_trace(const Image& x0, const PriorTerm& term, std::size_t iters,
                                      bool compose_degradation, Rng& rng) {
  if (iters == 0) throw Error("fixed_point_trace: K must be >= 1");
  if (!term.restorer) throw Error("fixed_point_trace: prior has no restorer");
  std::vector<double> out{psnr(x0, x0)};
  Image x = x0;
  for (std::size_t k = 0; k < iters; ++k) {
    Rng r = rng.split(static_cast<std::uint64_t>(k)).split(std::uint64_t{0});
    x = apply_term(x, term, compose_degradation, r);
    out.push_back(psnr(x, x0));
  }
  return out;
}

std::vector<double> combined_fixed_point_trace(const Image& x0, const std::vector<PriorTerm>& terms,
                                               const std::vector<double>& weights, std::size_t iters, Rng& rng,
                                               Image* final_iterate) {
  if (iters == 0) throw Error("combined_fixed_point_trace: K must be >= 1");
  if (terms.size() != weights.size()) throw Error("combined_fixed_point_trace: one weight per term");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw Error("combined_fixed_point_trace: weights must be >= 0");
    sum += w;
  }
  if (sum > 1.0 + 1e-12) throw Error("combined_fixed_point_trace: weights must sum to <= 1");

  std::vector<double> out{psnr(x0, x0)};
  Image x = x0;
  for (std::size_t k = 0; k < iters; ++k) {
    Image next = x;
    for (std::size_t n = 0; n < terms.size(); ++n) {
      Rng r = rng.split(static_cast<std::uint64_t>(k)).split(static_cast<std::uint64_t>(n));
      next.axpy(-weights[n], x - apply_term(x, terms[n], true, r));
    }
    x = std::move(next);
    out.push_back(psnr(x, x0));
  }
  if (final_iterate) *final_iterate = x;
  return out;
}

void ProbeGrid::validate() const {
  if (sigma_blur.empty() || sigma_noise.empty()) throw Error("probe grid axes must be non-empty");
  if (samples == 0) throw Error("probe grid needs samples >= 1");
  for (double v : sigma_blur)
    if (v < 0.0) throw Error("probe sigma_blur values must be >= 0");
  for (double v : sigma_noise)
    if (v < 0.0) throw Error("probe sigma_noise values must be >= 0");
}

void ProbeResult::write_csv(std::ostream& os) const {
  os << "sigma_blur,sigma_noise,mean,stderr\n";
  for (std::size_t r = 0; r < sigma_blur.size(); ++r)
    for (std::size_t c = 0; c < sigma_noise.size(); ++c)
      os << fmt_num(sigma_blur[r]) << ',' << fmt_num(sigma_noise[c]) << ',' << fmt_num(mean[r][c]) << ','
         << fmt_num(stderr_[r][c]) << '\n';
}

ProbeResult prior_loss_probe(const Image& x, const PriorTerm& term, const ProbeGrid& grid, Rng& rng) {
  grid.validate();
  ProbeResult res{grid.sigma_blur, grid.sigma_noise, {}, {}};
  for (std::size_t r = 0; r < grid.sigma_blur.size(); ++r) {
    const double sb = grid.sigma_blur[r];
    const Image blurred = sb > 0.0 ? gaussian_smooth(x, sb) : x;
    std::vector<double> means, errs;
    for (std::size_t c = 0; c < grid.sigma_noise.size(); ++c) {
      const Degradation noise(LinearOp::identity(), grid.sigma_noise[c]);
      double sum = 0.0, sum_sq = 0.0;
      for (std::size_t s = 0; s < grid.samples; ++s) {
        Rng stream = rng.split(static_cast<std::uint64_t>(r))
                         .split(static_cast<std::uint64_t>(c))
                         .split(static_cast<std::uint64_t>(s));
        const Image y = noise.apply(blurred, stream);
        const double d = l2_distance(y, apply_term(y, term, true, stream));
        sum += d;
        sum_sq += d * d;
      }
      const double n = static_cast<double>(grid.samples);
      const double m = sum / n;
      const double var = grid.samples > 1 ? std::max(0.0, (sum_sq - n * m * m) / (n - 1.0)) : 0.0;
      means.push_back(m);
      errs.push_back(std::sqrt(var / n));
    }
    res.mean.push_back(std::move(means));
    res.stderr_.push_back(std::move(errs));
  }
  return res;
}

std::vector<AblationPoint> strength_ablation(const Image& y, const LinearOp& A, const SolverConfig& cfg,
                                             const Image& reference, const StrengthAxis& axis) {
  if (axis.values.empty()) throw Error("strength_ablation: empty strength axis");
  if (axis.prior_index >= cfg.priors.size()) throw Error("strength_ablation: prior index out of range");
  std::vector<AblationPoint> out;
  for (double v : axis.values) {
    SolverConfig c = cfg;
    DegradationSpec& spec = c.priors[axis.prior_index].spec;
    if (axis.param == StrengthParam::noise_sigma) {
      spec.noise_sigma = Range::point(v);
    } else {
      if (spec.family != Family::blur || spec.is_fixed()) {
        throw Error("strength_ablation: blur_sigma axis needs a blur prior");
      }
      spec.blur_sigma = Range::point(v);
    }
    const SolveResult r = fire_hqs(y, A, c, reference.shape());
    out.push_back({v, psnr(r.x, reference), ssim(r.x, reference)});
  }
  return out;
}

}  // namespace fire
