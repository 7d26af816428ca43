#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fire/datafit.hpp"
#include "fire/image.hpp"
#include "fire/restorers.hpp"
#include "fire/rng.hpp"

namespace fire {

enum class Mode {
  /// Each prior's degradation is drawn once and used without noise.
  deterministic,
  /// A fresh (H, w) is drawn for every prior at every iteration.
  stochastic,
};

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

/// Per-iteration multiplier applied to every gamma_n.
struct StepSchedule {
  enum class Kind { constant, polynomial };
  Kind kind = Kind::constant;
  /// constant: factor = scale
  double scale = 1.0;
  /// polynomial: factor = gamma0 / (k + 1)^exponent, k counted from 0
  double gamma0 = 1.0;
  double exponent = 0.75;

  static StepSchedule constant(double scale = 1.0);
  static StepSchedule polynomial(double gamma0, double exponent);
  double factor(std::size_t k) const;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised when an iterate stops being finite.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what);
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Which argument RED subtracts inside the prox.
enum class RedForm {
  /// x - gamma R(x), as the iteration is usually printed.
  restorer,
  /// x - gamma (x - R(x)).
  residual,
};

struct SolverConfig {
  std::vector<PriorTerm> priors;
  double lambda = 1.0;
  std::size_t iters = 30;
  Mode mode = Mode::stochastic;
  StepSchedule schedule;
  /// Unset: return u_K when there are several priors, x_{K+1} otherwise.
  std::optional<bool> return_u;
  bool parallel_priors = false;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  ProxMethod prox = ProxMethod::automatic;
  double cg_tol = 1e-6;
  std::size_t cg_max_iters = 200;
  /// Draws per prior for the residual-function column of the trace. Zero
  /// reuses the iteration's own residuals.
  std::size_t f_samples = 0;
  /// Used by the RED baseline only.
  RedForm red_form = RedForm::restorer;
  /// Ground truth for the PSNR column.
  std::optional<Image> reference;

  double gamma_sum() const;
  bool returns_u() const;
  /// Throws ConfigError on sum(gamma) > 1, bad exponent or invalid priors.
  /// Logs a warning when sum(gamma) == 1.
  void validate() const;
};

struct TraceRow {
  std::size_t iter = 0;
  /// ||r_k^n|| for each prior, evaluated at x_k.
  std::vector<double> residual_norms;
  /// lambda f(x_k) + 1/2 sum gamma_n ||r_k^n||^2
  double objective = 0.0;
  /// ||F(x_k)||
  double f_norm = 0.0;
  /// PSNR of this iteration's output against the reference (NaN without one).
  double psnr = 0.0;
  /// ||x_{k+1} - x_k||
  double increment = 0.0;
  double ms = 0.0;
};

struct SolveTrace {
  std::vector<TraceRow> rows;
  std::size_t size() const { return rows.size(); }
  /// Header: iter, prior_<i>_residual..., objective, F_norm, psnr, ms.
  /// With `include_timing` false the ms column is written as 0 so that
  /// output is reproducible byte for byte.
  void write_csv(std::ostream& os, bool include_timing = true) const;
};

struct SolveResult {
  Image x;
  SolveTrace trace;
};

/// Stream for prior n at iteration k in stochastic mode.
Rng prior_stream(const Rng& root, std::size_t k, std::size_t n);

/// x - R(H x + w) with (H, w) drawn from term.spec using rng.
Image prior_residual(const Image& x, const PriorTerm& term, Rng& rng);
/// Same with an already drawn degradation.
Image prior_residual(const Image& x, const PriorTerm& term, const Degradation& d, Rng& rng);

/// Cheap pseudo-inverse used to start the iterations: A^T y for masks,
/// Wiener (snr 100) for convolutions, interpolation for decimation.
Image initial_estimate(const LinearOp& A, const Image& y, const Shape& x_shape);
/// Prior-free reconstruction used as baseline: Wiener with snr 1e3 for
/// convolutions, otherwise as initial_estimate.
Image pseudo_inverse(const LinearOp& A, const Image& y, const Shape& x_shape);

/// Fixed-points of restoration HQS: for k = 1..K, r_k^n = x_k - R^n(H x_k + w),
/// u_k = x_k - sum gamma_n r_k^n, x_{k+1} = prox_{lambda f}(u_k).
SolveResult fire_hqs(const Image& y, const LinearOp& A, const SolverConfig& cfg,
                     std::optional<Image> x0 = std::nullopt);
SolveResult fire_hqs(const Image& y, const LinearOp& A, const SolverConfig& cfg,
                     const Shape& x_shape, std::optional<Image> x0 = std::nullopt);

/// One iteration x_{k+1} = prox_{lambda f}(x_k - gamma R(x_k)). R sees x_k
/// directly; `context` is handed to it as the degradation (kernel, mask).
Image red_step(const Image& x, const DataFit& df, const Restorer& R, double gamma,
               RedForm form = RedForm::restorer, const Degradation& context = {});

/// One iteration x_{k+1} = R(prox_{lambda f}(x_k)).
Image pnp_hqs_step(const Image& x, const DataFit& df, const Restorer& R,
                   const Degradation& context = {});

/// H^T H (x - R(H x + w)) with one draw of (H, w). H must be linear.
Image sharp_gradient(const Image& x, const PriorTerm& term, Rng& rng);

/// ||x - prox_{lambda f}(x - g)|| where g averages `samples` prior residuals
/// per prior, weighted by gamma_n / sum(gamma).
double residual_function(const Image& x, const DataFit& df, const std::vector<PriorTerm>& priors,
                         std::size_t samples, Rng& rng);

/// Prior whose degradation is the measurement operator itself: fixed(A, 0).
PriorTerm conditioned_prior(const LinearOp& A, RestorerPtr restorer, double gamma,
                            std::string name = {});

enum class Method { fire, pnp_hqs, red };
std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// Runs K iterations of PnP-HQS or RED, with R the gamma-weighted average of
/// the configured restorers applied directly to the iterate. Method::fire
/// forwards to fire_hqs.
SolveResult solve(Method method, const Image& y, const LinearOp& A, const SolverConfig& cfg,
                  const Shape& x_shape, std::optional<Image> x0 = std::nullopt);

}  // namespace fire
