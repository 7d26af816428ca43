#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fire/engine.hpp"
#include "fire/remote.hpp"

/// JSON experiment configs and the restorer registry used by the CLI.
namespace fire::config {

inline constexpr int kSchemaVersion = 1;

/// One entry of a "priors" list before it is bound to an image.
struct PriorSpec {
  std::string restorer;
  double gamma = 0.0;
  /// Overrides the restorer's default degradation class.
  std::optional<nlohmann::json> degradation;
  /// Use the measurement operator itself as degradation: fixed(A, 0).
  bool conditioned = false;
  nlohmann::json params = nlohmann::json::object();
  std::string name;
};

struct FixedpointSettings {
  std::size_t iters = 20;
  std::size_t prior = 0;
};

struct ProbeSettings {
  std::vector<double> sigma_blur{0.0, 1.0, 2.0};
  std::vector<double> sigma_noise{0.0, 0.05, 0.1};
  std::size_t samples = 8;
  std::size_t prior = 0;
};

struct PriorSet {
  std::string name;
  std::vector<PriorSpec> priors;
};

struct BenchSettings {
  std::vector<Method> methods{Method::fire, Method::pnp_hqs, Method::red};
  /// Empty: a single set made of the top-level priors.
  std::vector<PriorSet> prior_sets;
};

struct ExperimentConfig {
  int version = kSchemaVersion;
  std::filesystem::path base_dir;
  /// Operator description, see build_operator.
  nlohmann::json op = {{"type", "identity"}};
  double noise_sigma = 0.0;
  std::vector<PriorSpec> priors;
  /// Solver settings; `priors` and `reference` are filled per image.
  SolverConfig solver;
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output_dir = "out";
  FixedpointSettings fixedpoint;
  ProbeSettings probe;
  BenchSettings bench;
};

/// Throws ConfigError with a message naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Uniform range from a number or a [lo, hi] pair.
Range parse_range(const nlohmann::json& j);

/// {"type": "identity" | "blur" (sigma, size?) | "kernel" (path) |
///  "decimation" (factor) | "mask" (path or drop_prob) | "compose" (ops)}.
/// Random masks are drawn from `rng`.
LinearOp build_operator(const nlohmann::json& j, const Shape& x_shape, Rng rng,
                        const std::filesystem::path& base_dir = {});

/// {"family": ..., "noise_sigma", "blur_sigma", "factor", "drop_prob",
///  "quality", "mask"} or {"family": "fixed", "op": {...}, "sigma"}.
DegradationSpec parse_degradation(const nlohmann::json& j, const Shape& x_shape,
                                  const std::filesystem::path& base_dir = {});

Image read_mask(const std::filesystem::path& path);

/// Resolves restorer ids to instances and default degradation classes.
/// Remote handles are opened once per address and shared.
class Registry {
 public:
  explicit Registry(int remote_timeout_ms = 10000) : timeout_ms_(remote_timeout_ms) {}

  RestorerPtr restorer(const std::string& id, const nlohmann::json& params = nlohmann::json::object());
  /// Default degradation class paired with `id`.
  DegradationSpec default_spec(const std::string& id);

  std::vector<PriorTerm> build_priors(const std::vector<PriorSpec>& specs, const LinearOp& A,
                                      const Shape& x_shape, const std::filesystem::path& base_dir = {});

 private:
  std::shared_ptr<remote::RemoteHandle> remote_handle(const std::string& address);

  int timeout_ms_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<remote::RemoteHandle>> remotes_;
};

/// Known restorer ids, for help output.
std::vector<std::string> restorer_ids();

}  // namespace fire::config
