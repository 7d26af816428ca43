#include "fire/cli.hpp"

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>

#include "fire/config.hpp"
#include "fire/diagnostics.hpp"
#include "fire/io.hpp"
#include "fire/metrics.hpp"
#include "fire/parallel.hpp"

namespace fire::cli {
namespace fs = std::filesystem;

namespace {

/// Raised for bad inputs discovered after parsing (exit code 2).
class InputError : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t threads = 1;
  std::string address;
  int timeout_ms = 10000;
};

struct Problem {
  std::string name;
  Image x;
  LinearOp A;
  Image y;
};

std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double safe_ssim(const Image& x, const Image& ref) {
  try {
    return ssim(x, ref);
  } catch (const ShapeError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

void configure_logging() {
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("FIRE_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept real names.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

config::ExperimentConfig load(const Options& o) {
  auto cfg = config::load_config(o.config);
  if (o.seed) cfg.solver.seed = *o.seed;
  if (!o.out.empty()) cfg.output_dir = o.out;
  cfg.solver.threads = std::max<std::size_t>(1, o.threads);
  if (cfg.inputs.empty()) throw ConfigError("config lists no inputs");
  return cfg;
}

std::vector<Problem> load_problems(const config::ExperimentConfig& cfg) {
  const Rng root(cfg.solver.seed);
  std::vector<Problem> out;
  for (const auto& path : cfg.inputs) {
    if (!fs::exists(path)) throw InputError("input image not found: " + path.string());
    Problem p;
    p.name = path.stem().string();
    p.x = io::read_image(path);
    p.A = config::build_operator(cfg.op, p.x.shape(), root.split("operator/" + p.name), cfg.base_dir);
    Rng noise = root.split("measurement/" + p.name);
    p.y = Degradation(p.A, cfg.noise_sigma).apply(p.x, noise);
    out.push_back(std::move(p));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io::IoError("cannot write " + path.string());
  os << text;
}

SolverConfig solver_for(const config::ExperimentConfig& cfg, std::vector<PriorTerm> priors, const Image& ref,
                        std::size_t threads) {
  SolverConfig s = cfg.solver;
  s.priors = std::move(priors);
  s.reference = ref;
  s.threads = threads;
  return s;
}

// ---------------------------------------------------------------- restore

int cmd_restore(const Options& o) {
  auto cfg = load(o);
  const auto problems = load_problems(cfg);
  fs::create_directories(cfg.output_dir);
  config::Registry registry(o.timeout_ms);
  std::vector<std::vector<PriorTerm>> priors;
  for (const auto& p : problems) priors.push_back(registry.build_priors(cfg.priors, p.A, p.x.shape(), cfg.base_dir));
  for (const auto& p : priors) {
    SolverConfig s = cfg.solver;
    s.priors = p;
    s.validate();
  }

  struct Row {
    double pinv_psnr, pinv_ssim, psnr, ssim;
  };
  std::vector<Row> rows(problems.size());
  const std::size_t outer = problems.size() > 1 ? o.threads : 1;
  const std::size_t inner = problems.size() > 1 ? 1 : o.threads;
  parallel_for(problems.size(), outer, [&](std::size_t i) {
    const Problem& p = problems[i];
    const auto start = std::chrono::steady_clock::now();
    const SolveResult r = fire_hqs(p.y, p.A, solver_for(cfg, priors[i], p.x, inner), p.x.shape());
    const Image pinv = pseudo_inverse(p.A, p.y, p.x.shape());
    spdlog::info("{}: {} iterations in {:.1f} ms", p.name, r.trace.size(),
                 std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    io::write_image(cfg.output_dir / (p.name + "_degraded.png"), p.y);
    io::write_image(cfg.output_dir / (p.name + "_pinv.png"), pinv);
    io::write_image(cfg.output_dir / (p.name + "_restored.png"), r.x);
    std::ofstream trace(cfg.output_dir / (p.name + "_trace.csv"), std::ios::binary);
    r.trace.write_csv(trace, false);
    rows[i] = {psnr(pinv, p.x), safe_ssim(pinv, p.x), psnr(r.x, p.x), safe_ssim(r.x, p.x)};
  });

  std::string csv = "image,pinv_psnr,pinv_ssim,psnr,ssim,gain_db\n";
  double mp = 0, ms = 0, mg = 0;
  std::printf("%-24s %10s %10s %10s %10s\n", "image", "pinv_psnr", "psnr", "ssim", "gain_db");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    csv += problems[i].name + "," + fixed(r.pinv_psnr) + "," + fixed(r.pinv_ssim) + "," + fixed(r.psnr) + "," +
           fixed(r.ssim) + "," + fixed(r.psnr - r.pinv_psnr) + "\n";
    std::printf("%-24s %10s %10s %10s %10s\n", problems[i].name.c_str(), fixed(r.pinv_psnr, 2).c_str(),
                fixed(r.psnr, 2).c_str(), fixed(r.ssim, 4).c_str(), fixed(r.psnr - r.pinv_psnr, 2).c_str());
    mp += r.psnr;
    ms += r.ssim;
    mg += r.psnr - r.pinv_psnr;
  }
  const double n = static_cast<double>(rows.size());
  std::printf("%-24s %10s %10s %10s %10s\n", "mean", "", fixed(mp / n, 2).c_str(), fixed(ms / n, 4).c_str(),
              fixed(mg / n, 2).c_str());
  write_text(cfg.output_dir / "metrics.csv", csv);
  return kOk;
}

// ---------------------------------------------------------------- fixedpoint

int cmd_fixedpoint(const Options& o) {
  auto cfg = load(o);
  if (cfg.priors.empty()) throw ConfigError("fixedpoint needs at least one prior");
  if (cfg.fixedpoint.prior >= cfg.priors.size()) throw ConfigError("fixedpoint.prior is out of range");
  if (cfg.fixedpoint.iters == 0) throw ConfigError("fixedpoint.iters must be >= 1");
  const auto problems = load_problems(cfg);
  fs::create_directories(cfg.output_dir);
  config::Registry registry(o.timeout_ms);
  const Rng root(cfg.solver.seed);

  for (const auto& p : problems) {
    const auto priors = registry.build_priors(cfg.priors, p.A, p.x.shape(), cfg.base_dir);
    const PriorTerm& term = priors[cfg.fixedpoint.prior];
    Rng rng = root.split("fixedpoint/" + p.name);
    const auto off = fixed_point_trace(p.x, term, cfg.fixedpoint.iters, false, rng);
    const auto on = fixed_point_trace(p.x, term, cfg.fixedpoint.iters, true, rng);
    std::vector<double> combined;
    if (priors.size() > 1) {
      std::vector<double> weights;
      for (const auto& t : priors) weights.push_back(t.gamma);
      combined = combined_fixed_point_trace(p.x, priors, weights, cfg.fixedpoint.iters, rng);
    }
    std::string csv = std::string("iter,compose_off,compose_on") + (combined.empty() ? "" : ",combined") + "\n";
    for (std::size_t k = 0; k < off.size(); ++k) {
      csv += std::to_string(k) + "," + fixed(off[k]) + "," + fixed(on[k]);
      if (!combined.empty()) csv += "," + fixed(combined[k]);
      csv += "\n";
    }
    write_text(cfg.output_dir / (p.name + "_fixedpoint.csv"), csv);
    std::vector<Series> series{{"x <- R(x)", off, true}, {"x <- R(Hx + w)", on, false}};
    if (!combined.empty()) series.push_back({"combined", combined, false});
    write_text(cfg.output_dir / (p.name + "_fixedpoint.svg"),
               line_plot_svg(series, "Fixed-point iteration: " + term.name, "iteration", "PSNR vs start (dB)"));
    std::printf("%s: final PSNR compose-off %s dB, compose-on %s dB\n", p.name.c_str(), fixed(off.back(), 2).c_str(),
                fixed(on.back(), 2).c_str());
  }
  return kOk;
}

// ---------------------------------------------------------------- probe

int cmd_probe(const Options& o) {
  auto cfg = load(o);
  if (cfg.priors.empty()) throw ConfigError("probe needs at least one prior");
  if (cfg.probe.prior >= cfg.priors.size()) throw ConfigError("probe.prior is out of range");
  const ProbeGrid grid{cfg.probe.sigma_blur, cfg.probe.sigma_noise, cfg.probe.samples};
  try {
    grid.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto problems = load_problems(cfg);
  fs::create_directories(cfg.output_dir);
  config::Registry registry(o.timeout_ms);
  const Rng root(cfg.solver.seed);

  std::vector<ProbeResult> results(problems.size());
  std::vector<PriorTerm> terms;
  for (const auto& p : problems) {
    terms.push_back(registry.build_priors(cfg.priors, p.A, p.x.shape(), cfg.base_dir)[cfg.probe.prior]);
  }
  parallel_for(problems.size(), o.threads, [&](std::size_t i) {
    Rng rng = root.split("probe/" + problems[i].name);
    results[i] = prior_loss_probe(problems[i].x, terms[i], grid, rng);
  });

  auto emit = [&](const ProbeResult& r, const std::string& stem) {
    std::ostringstream os;
    r.write_csv(os);
    write_text(cfg.output_dir / (stem + ".csv"), os.str());
    write_text(cfg.output_dir / (stem + ".svg"), heatmap_svg(r, "Average distance ||y - R(Hy + w)||"));
  };
  for (std::size_t i = 0; i < problems.size(); ++i) {
    emit(results[i], problems[i].name + "_probe");
    if (results[i].mean.size() == 1 && results[i].mean[0].size() == 1) {
      std::printf("%s: d(y) = %s\n", problems[i].name.c_str(), fixed(results[i].mean[0][0], 6).c_str());
    }
  }
  if (results.size() > 1) {
    ProbeResult avg = results.front();
    for (std::size_t r = 0; r < avg.mean.size(); ++r) {
      for (std::size_t c = 0; c < avg.mean[r].size(); ++c) {
        double m = 0.0, v = 0.0;
        for (const auto& res : results) {
          m += res.mean[r][c];
          v += res.stderr_[r][c] * res.stderr_[r][c];
        }
        const double n = static_cast<double>(results.size());
        avg.mean[r][c] = m / n;
        avg.stderr_[r][c] = std::sqrt(v) / n;
      }
    }
    emit(avg, "probe_mean");
  }
  return kOk;
}

// ---------------------------------------------------------------- bench

int cmd_bench(const Options& o) {
  auto cfg = load(o);
  std::vector<config::PriorSet> sets = cfg.bench.prior_sets;
  if (sets.empty()) sets.push_back({"priors", cfg.priors});
  if (cfg.bench.methods.empty()) throw ConfigError("bench.methods is empty");
  const auto problems = load_problems(cfg);
  fs::create_directories(cfg.output_dir);
  config::Registry registry(o.timeout_ms);

  const std::size_t n_cells = problems.size() * sets.size();
  std::vector<std::vector<PriorTerm>> cell_priors(n_cells);
  for (std::size_t c = 0; c < n_cells; ++c) {
    const Problem& p = problems[c / sets.size()];
    cell_priors[c] = registry.build_priors(sets[c % sets.size()].priors, p.A, p.x.shape(), cfg.base_dir);
    SolverConfig s = cfg.solver;
    s.priors = cell_priors[c];
    s.validate();
  }

  struct Cell {
    double pinv = 0;
    std::vector<double> psnr, ssim;
  };
  std::vector<Cell> cells(n_cells);
  parallel_for(n_cells, o.threads, [&](std::size_t c) {
    const Problem& p = problems[c / sets.size()];
    Cell& out = cells[c];
    out.pinv = psnr(pseudo_inverse(p.A, p.y, p.x.shape()), p.x);
    for (Method m : cfg.bench.methods) {
      const SolveResult r = solve(m, p.y, p.A, solver_for(cfg, cell_priors[c], p.x, 1), p.x.shape());
      out.psnr.push_back(psnr(r.x, p.x));
      out.ssim.push_back(safe_ssim(r.x, p.x));
    }
  });

  std::string csv = "image,prior_set,pinv_psnr";
  for (Method m : cfg.bench.methods) csv += "," + to_string(m) + "_psnr," + to_string(m) + "_ssim";
  csv += ",best_method\n";
  const std::size_t nm = cfg.bench.methods.size();
  std::vector<std::vector<double>> mean(sets.size(), std::vector<double>(nm, 0.0));
  for (std::size_t c = 0; c < n_cells; ++c) {
    const Cell& cell = cells[c];
    csv += problems[c / sets.size()].name + "," + sets[c % sets.size()].name + "," + fixed(cell.pinv);
    std::size_t best = 0;
    for (std::size_t m = 0; m < nm; ++m) {
      csv += "," + fixed(cell.psnr[m]) + "," + fixed(cell.ssim[m]);
      if (cell.psnr[m] > cell.psnr[best]) best = m;
      mean[c % sets.size()][m] += cell.psnr[m] / static_cast<double>(problems.size());
    }
    csv += "," + to_string(cfg.bench.methods[best]) + "\n";
  }
  write_text(cfg.output_dir / "bench.csv", csv);

  std::printf("%-20s", "prior_set");
  for (Method m : cfg.bench.methods) std::printf(" %12s", to_string(m).c_str());
  std::printf("   (mean PSNR, dB)\n");
  for (std::size_t s = 0; s < sets.size(); ++s) {
    std::printf("%-20s", sets[s].name.c_str());
    for (double v : mean[s]) std::printf(" %12s", fixed(v, 2).c_str());
    std::printf("\n");
  }
  return kOk;
}

// ---------------------------------------------------------------- serve-check

int cmd_serve_check(const Options& o) {
  if (o.address.empty()) throw ConfigError("serve-check needs --address");
  auto handle = remote::open_remote(o.address, o.timeout_ms);
  const auto caps = handle->handshake();
  std::printf("family: %s\nshape_policy: %s\n", caps.family.c_str(), caps.shape_policy.c_str());
  Rng rng(o.seed.value_or(0));
  Image probe(8, 8, 1);
  for (std::size_t i = 0; i < probe.size(); ++i) probe[i] = rng.uniform();
  const auto start = std::chrono::steady_clock::now();
  const Image out = handle->restore(probe, false);
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  std::printf("round trip: %.2f ms, max |R(x) - x| = %.6g\n", ms, max_abs_diff(out, probe));
  handle->close();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  configure_logging();
  CLI::App app{"Fixed-points of restoration: implicit priors for imaging inverse problems"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required();
    sub->add_option("--seed", o.seed, "override solver.seed");
    sub->add_option("--out", o.out, "override the output directory");
    sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--timeout", o.timeout_ms, "remote prior timeout in ms");
  };
  auto* restore = app.add_subcommand("restore", "solve the configured inverse problem for every input");
  auto* fixedpoint = app.add_subcommand("fixedpoint", "iterate a restorer with and without its degradation");
  auto* probe = app.add_subcommand("probe", "map d(y) = ||y - R(Hy + w)|| over blur and noise levels");
  auto* bench = app.add_subcommand("bench", "compare fire, pnp_hqs and red over prior sets");
  for (auto* s : {restore, fixedpoint, probe, bench}) add_common(s);
  auto* serve_check = app.add_subcommand("serve-check", "handshake with a remote prior and time one request");
  serve_check->add_option("--address", o.address, "tcp:<host>:<port> or exec:<program> [args]")->required();
  serve_check->add_option("--timeout", o.timeout_ms, "timeout in ms");
  serve_check->add_option("--seed", o.seed, "seed of the probe tensor");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*restore) return cmd_restore(o);
    if (*fixedpoint) return cmd_fixedpoint(o);
    if (*probe) return cmd_probe(o);
    if (*bench) return cmd_bench(o);
    if (*serve_check) return cmd_serve_check(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const io::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kSolverError;
  }
  return kUsage;
}

}  // namespace fire::cli
