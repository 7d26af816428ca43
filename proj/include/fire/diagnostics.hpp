#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "fire/engine.hpp"
#include "fire/image.hpp"
#include "fire/restorers.hpp"
#include "fire/rng.hpp"

namespace fire {

/// PSNR against x0 of x_0..x_K for either x <- R(x) (compose off; R still
/// receives a drawn degradation as context) or x <- R(H x + w) (compose on).
/// Returns K + 1 values.
std::vector<double> fixed_point_trace(const Image& x0, const PriorTerm& term, std::size_t iters,
                                      bool compose_degradation, Rng& rng);

/// Iterates x <- x - sum w_n (x - T_n(x)) with T_n = R_n o D_n; no data term.
std::vector<double> combined_fixed_point_trace(const Image& x0, const std::vector<PriorTerm>& terms,
                                               const std::vector<double>& weights,
                                               std::size_t iters, Rng& rng,
                                               Image* final_iterate = nullptr);

struct ProbeGrid {
  std::vector<double> sigma_blur;
  std::vector<double> sigma_noise;
  std::size_t samples = 8;

  void validate() const;
};

/// mean[r][c] and stderr[r][c] of d(y) = ||y - R(H y + w)|| for
/// y = blur(x, sigma_blur[r]) + sigma_noise[c] n. sigma_blur = 0 means no blur.
struct ProbeResult {
  std::vector<double> sigma_blur;
  std::vector<double> sigma_noise;
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> stderr_;

  void write_csv(std::ostream& os) const;
};

/// Cells are evaluated with independent streams rng.split(row).split(col);
/// sample s of a cell uses .split(s), so a larger sample count extends the
/// same sequence of draws.
ProbeResult prior_loss_probe(const Image& x, const PriorTerm& term, const ProbeGrid& grid,
                             Rng& rng);

enum class StrengthParam { noise_sigma, blur_sigma };

struct StrengthAxis {
  std::size_t prior_index = 0;
  StrengthParam param = StrengthParam::noise_sigma;
  std::vector<double> values;
};

struct AblationPoint {
  double strength = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

/// One fire_hqs solve per strength, with the chosen prior's degradation
/// parameter pinned to that value.
std::vector<AblationPoint> strength_ablation(const Image& y, const LinearOp& A,
                                             const SolverConfig& cfg, const Image& reference,
                                             const StrengthAxis& axis);

// Static SVG output.
struct Series {
  std::string label;
  std::vector<double> values;
  bool dashed = false;
};

std::string line_plot_svg(const std::vector<Series>& series, const std::string& title,
                          const std::string& x_label, const std::string& y_label);
std::string heatmap_svg(const ProbeResult& result, const std::string& title);

}  // namespace fire
