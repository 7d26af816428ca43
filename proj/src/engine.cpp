#include "fire/engine.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "fire/fourier.hpp"
#include "fire/metrics.hpp"
#include "fire/parallel.hpp"

namespace fire {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void guard_finite(const Image& x, std::size_t iteration, const char* what) {
  if (!x.all_finite()) {
    throw DivergenceError(iteration, std::string(what) + " is not finite at iteration " +
                                         std::to_string(iteration));
  }
}

Image linear_estimate(const LinearOp& A, const Image& y, const Shape& x_shape, double snr) {
  Image x;
  if (std::holds_alternative<MaskOp>(A.variant())) {
    x = A.adjoint(y);
  } else if (const auto* d = std::get_if<DecimationOp>(&A.variant())) {
    x = interpolate_upsample(y, d->factor);
  } else if (auto t = A.transfer(y.height(), y.width()); t && y.shape() == x_shape) {
    fourier::Spectrum w(t->size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::conj((*t)[i]) / (std::norm((*t)[i]) + 1.0 / snr);
    x = fourier::apply_filter(y, w).clamped();
  } else {
    x = A.adjoint(y);
  }
  if (x.shape() != x_shape) {
    throw ShapeError("initial estimate has shape " + to_string(x.shape()) + ", expected " + to_string(x_shape));
  }
  return x;
}

}  // namespace

std::string to_string(Mode m) { return m == Mode::deterministic ? "deterministic" : "stochastic"; }

Mode mode_from_string(const std::string& s) {
  if (s == "deterministic") return Mode::deterministic;
  if (s == "stochastic") return Mode::stochastic;
  throw ConfigError("unknown mode '" + s + "'");
}

StepSchedule StepSchedule::constant(double scale) {
  StepSchedule s;
  s.kind = Kind::constant;
  s.scale = scale;
  return s;
}

StepSchedule StepSchedule::polynomial(double gamma0, double exponent) {
  StepSchedule s;
  s.kind = Kind::polynomial;
  s.gamma0 = gamma0;
  s.exponent = exponent;
  return s;
}

double StepSchedule::factor(std::size_t k) const {
  if (kind == Kind::constant) return scale;
  return gamma0 / std::pow(static_cast<double>(k + 1), exponent);
}

DivergenceError::DivergenceError(std::size_t iteration, const std::string& what)
    : Error(what), iteration_(iteration) {}

double SolverConfig::gamma_sum() const {
  double s = 0.0;
  for (const auto& p : priors) s += p.gamma;
  return s;
}

bool SolverConfig::returns_u() const { return return_u.value_or(priors.size() > 1); }

void SolverConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be non-negative");
  if (threads == 0) throw ConfigError("threads must be >= 1");
  if (cg_tol <= 0.0 || cg_max_iters == 0) throw ConfigError("invalid CG settings");
  for (const auto& p : priors) {
    try {
      p.validate();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  const double s = gamma_sum();
  if (s > 1.0 + 1e-12) throw ConfigError("sum of prior weights is " + fmt_num(s) + ", must be <= 1");
  if (std::abs(s - 1.0) <= 1e-12) {
    spdlog::warn("sum of prior weights equals 1; convergence is only guaranteed for a sum below 1");
  }
  if (schedule.kind == StepSchedule::Kind::polynomial) {
    if (!(schedule.exponent > 0.5 && schedule.exponent <= 1.0)) {
      throw ConfigError("polynomial schedule exponent must lie in (0.5, 1]");
    }
    if (!(schedule.gamma0 > 0.0)) throw ConfigError("polynomial schedule gamma0 must be positive");
  } else if (!(schedule.scale > 0.0)) {
    throw ConfigError("constant schedule scale must be positive");
  }
}

void SolveTrace::write_csv(std::ostream& os, bool include_timing) const {
  const std::size_t n = rows.empty() ? 0 : rows.front().residual_norms.size();
  os << "iter";
  for (std::size_t i = 0; i < n; ++i) os << ",prior_" << i << "_residual";
  os << ",objective,F_norm,psnr,ms\n";
  for (const auto& r : rows) {
    os << r.iter;
    for (double v : r.residual_norms) os << ',' << fmt_num(v);
    os << ',' << fmt_num(r.objective) << ',' << fmt_num(r.f_norm) << ',' << fmt_num(r.psnr) << ','
       << (include_timing ? fmt_num(r.ms) : "0") << '\n';
  }
}

Rng prior_stream(const Rng& root, std::size_t k, std::size_t n) {
  return root.split("prior").split(static_cast<std::uint64_t>(k)).split(static_cast<std::uint64_t>(n));
}

Image prior_residual(const Image& x, const PriorTerm& term, Rng& rng) {
  const Degradation d = sample(term.spec, x.shape(), rng);
  return prior_residual(x, term, d, rng);
}

Image prior_residual(const Image& x, const PriorTerm& term, const Degradation& d, Rng& rng) {
  const Image restored = term.restorer->restore(d.apply(x, rng), d);
  if (restored.shape() != x.shape()) {
    throw ShapeError("restorer '" + term.restorer->id() + "' returned " + to_string(restored.shape()) +
                     " for a " + to_string(x.shape()) + " image");
  }
  return x - restored;
}

Image initial_estimate(const LinearOp& A, const Image& y, const Shape& x_shape) {
  return linear_estimate(A, y, x_shape, 100.0);
}

Image pseudo_inverse(const LinearOp& A, const Image& y, const Shape& x_shape) {
  return linear_estimate(A, y, x_shape, 1e3);
}

SolveResult fire_hqs(const Image& y, const LinearOp& A, const SolverConfig& cfg, std::optional<Image> x0) {
  const Shape xs = x0 ? x0->shape() : A.input_shape(y.shape());
  return fire_hqs(y, A, cfg, xs, std::move(x0));
}

SolveResult fire_hqs(const Image& y, const LinearOp& A, const SolverConfig& cfg, const Shape& x_shape,
                     std::optional<Image> x0) {
  cfg.validate();
  const DataFit df = DataFit::make(A, y, cfg.lambda, x_shape);
  Image x = x0 ? std::move(*x0) : initial_estimate(A, y, x_shape);
  require_same_shape(x, Image(x_shape), "fire_hqs initial estimate");
  guard_finite(x, 0, "initial estimate");

  const Rng root(cfg.seed);
  const std::size_t n_priors = cfg.priors.size();
  const std::size_t workers = cfg.parallel_priors ? cfg.threads : 1;
  const double gsum = cfg.gamma_sum();

  std::vector<Degradation> fixed(n_priors);
  if (cfg.mode == Mode::deterministic) {
    for (std::size_t n = 0; n < n_priors; ++n) {
      Rng r = root.split("prior").split(static_cast<std::uint64_t>(n));
      fixed[n] = sample(cfg.priors[n].spec, x_shape, r).without_noise();
    }
  }
  const Rng f_root = root.split("F");

  SolveResult result;
  Image u = x;
  std::vector<Image> residuals(n_priors);
  for (std::size_t k = 0; k < cfg.iters; ++k) {
    const auto start = Clock::now();
    parallel_for(n_priors, workers, [&](std::size_t n) {
      const PriorTerm& term = cfg.priors[n];
      if (cfg.mode == Mode::deterministic) {
        Rng unused(0);
        residuals[n] = prior_residual(x, term, fixed[n], unused);
      } else {
        Rng r = prior_stream(root, k, n);
        residuals[n] = prior_residual(x, term, r);
      }
    });

    TraceRow row;
    row.iter = k + 1;
    row.objective = cfg.lambda * df.value(x);
    const double step = cfg.schedule.factor(k);
    u = x;
    for (std::size_t n = 0; n < n_priors; ++n) {
      const double norm = l2_norm(residuals[n]);
      row.residual_norms.push_back(norm);
      row.objective += 0.5 * cfg.priors[n].gamma * norm * norm;
      u.axpy(-step * cfg.priors[n].gamma, residuals[n]);
    }
    guard_finite(u, k + 1, "u");

    if (cfg.f_samples > 0) {
      Rng r = f_root;
      row.f_norm = residual_function(x, df, cfg.priors, cfg.f_samples, r);
    } else {
      Image g(x_shape);
      if (gsum > 0.0) {
        for (std::size_t n = 0; n < n_priors; ++n) g.axpy(cfg.priors[n].gamma / gsum, residuals[n]);
      }
      row.f_norm = l2_distance(x, prox(df, x - g, cfg.prox, cfg.cg_tol, cfg.cg_max_iters));
    }

    Image next = prox(df, u, cfg.prox, cfg.cg_tol, cfg.cg_max_iters);
    guard_finite(next, k + 1, "x");
    row.increment = l2_distance(next, x);
    x = std::move(next);
    row.psnr = cfg.reference ? psnr(cfg.returns_u() ? u : x, *cfg.reference) : kNaN;
    row.ms = elapsed_ms(start);
    spdlog::debug("iter {} objective {:.6g} F {:.6g} increment {:.3g}", row.iter, row.objective, row.f_norm,
                  row.increment);
    result.trace.rows.push_back(std::move(row));
  }
  result.x = cfg.returns_u() && cfg.iters > 0 ? u : x;
  return result;
}

Image red_step(const Image& x, const DataFit& df, const Restorer& R, double gamma, RedForm form,
               const Degradation& context) {
  const Image z = R.restore(x, context);
  Image arg = x;
  if (form == RedForm::restorer) {
    arg.axpy(-gamma, z);
  } else {
    arg.axpy(-gamma, x - z);
  }
  return prox(df, arg);
}

Image pnp_hqs_step(const Image& x, const DataFit& df, const Restorer& R, const Degradation& context) {
  return R.restore(prox(df, x), context);
}

Image sharp_gradient(const Image& x, const PriorTerm& term, Rng& rng) {
  const Degradation d = sample(term.spec, x.shape(), rng);
  const LinearOp& H = d.linear();
  const Image r = prior_residual(x, term, d, rng);
  return H.adjoint(H.apply(r));
}

double residual_function(const Image& x, const DataFit& df, const std::vector<PriorTerm>& priors,
                         std::size_t samples, Rng& rng) {
  if (samples == 0) throw Error("residual_function: samples must be >= 1");
  double gsum = 0.0;
  for (const auto& p : priors) gsum += p.gamma;
  Image g(x.shape());
  if (gsum > 0.0) {
    for (std::size_t n = 0; n < priors.size(); ++n) {
      const double w = priors[n].gamma / gsum / static_cast<double>(samples);
      for (std::size_t s = 0; s < samples; ++s) {
        Rng r = rng.split(static_cast<std::uint64_t>(n)).split(static_cast<std::uint64_t>(s));
        g.axpy(w, prior_residual(x, priors[n], r));
      }
    }
  }
  return l2_distance(x, prox(df, x - g));
}

PriorTerm conditioned_prior(const LinearOp& A, RestorerPtr restorer, double gamma, std::string name) {
  return make_prior(std::move(restorer), DegradationSpec::fixed(A, 0.0), gamma, std::move(name));
}

std::string to_string(Method m) {
  switch (m) {
    case Method::fire: return "fire";
    case Method::pnp_hqs: return "pnp_hqs";
    case Method::red: return "red";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "fire" || s == "fire_hqs") return Method::fire;
  if (s == "pnp_hqs" || s == "pnp") return Method::pnp_hqs;
  if (s == "red") return Method::red;
  throw ConfigError("unknown method '" + s + "'");
}

SolveResult solve(Method method, const Image& y, const LinearOp& A, const SolverConfig& cfg, const Shape& x_shape,
                  std::optional<Image> x0) {
  if (method == Method::fire) return fire_hqs(y, A, cfg, x_shape, std::move(x0));

  cfg.validate();
  const DataFit df = DataFit::make(A, y, cfg.lambda, x_shape);
  Image x = x0 ? std::move(*x0) : initial_estimate(A, y, x_shape);
  require_same_shape(x, Image(x_shape), "solve initial estimate");

  const Rng root(cfg.seed);
  const std::size_t n_priors = cfg.priors.size();
  const std::size_t workers = cfg.parallel_priors ? cfg.threads : 1;
  const double gsum = cfg.gamma_sum();

  SolveResult result;
  std::vector<Image> restored(n_priors);
  for (std::size_t k = 0; k < cfg.iters; ++k) {
    const auto start = Clock::now();
    const Image v = method == Method::pnp_hqs ? prox(df, x, cfg.prox, cfg.cg_tol, cfg.cg_max_iters) : x;
    parallel_for(n_priors, workers, [&](std::size_t n) {
      Rng r = prior_stream(root, k, n);
      const Degradation context = sample(cfg.priors[n].spec, x_shape, r);
      restored[n] = cfg.priors[n].restorer->restore(v, context);
      require_same_shape(restored[n], v, "restorer output");
    });

    TraceRow row;
    row.iter = k + 1;
    row.objective = cfg.lambda * df.value(x);
    for (std::size_t n = 0; n < n_priors; ++n) {
      const double norm = l2_distance(v, restored[n]);
      row.residual_norms.push_back(norm);
      row.objective += 0.5 * cfg.priors[n].gamma * norm * norm;
    }
    row.f_norm = kNaN;

    Image next;
    if (method == Method::pnp_hqs) {
      if (gsum > 0.0) {
        next = Image(x_shape);
        for (std::size_t n = 0; n < n_priors; ++n) next.axpy(cfg.priors[n].gamma / gsum, restored[n]);
      } else {
        next = v;
      }
    } else {
      const double step = cfg.schedule.factor(k);
      Image arg = x;
      for (std::size_t n = 0; n < n_priors; ++n) {
        const double g = step * cfg.priors[n].gamma;
        if (cfg.red_form == RedForm::restorer) {
          arg.axpy(-g, restored[n]);
        } else {
          arg.axpy(-g, x - restored[n]);
        }
      }
      next = prox(df, arg, cfg.prox, cfg.cg_tol, cfg.cg_max_iters);
    }
    guard_finite(next, k + 1, "x");
    row.increment = l2_distance(next, x);
    x = std::move(next);
    row.psnr = cfg.reference ? psnr(x, *cfg.reference) : kNaN;
    row.ms = elapsed_ms(start);
    result.trace.rows.push_back(std::move(row));
  }
  result.x = std::move(x);
  return result;
}

}  // namespace fire
