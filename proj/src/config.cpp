#include "fire/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "fire/io.hpp"
#include "fire/kernel.hpp"

namespace fire::config {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  return j[key].get<T>();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);) out.push_back(part);
  return out;
}

double to_double(const std::string& s, const std::string& id) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("bad number '" + s + "' in restorer id '" + id + "'");
}

std::vector<fs::path> expand_inputs(const json& j, const fs::path& base) {
  std::vector<std::string> entries;
  if (j.is_string()) {
    entries.push_back(j.get<std::string>());
  } else {
    entries = j.get<std::vector<std::string>>();
  }
  std::vector<fs::path> out;
  for (const auto& e : entries) {
    const fs::path p = resolve(base, e);
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& f : fs::directory_iterator(p)) {
        const auto ext = f.path().extension().string();
        if (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm") files.push_back(f.path());
      }
      std::sort(files.begin(), files.end());
      out.insert(out.end(), files.begin(), files.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

PriorSpec parse_prior(const json& j) {
  PriorSpec p;
  if (j.is_string()) {
    p.restorer = j.get<std::string>();
    return p;
  }
  p.restorer = j.at("restorer").get<std::string>();
  p.gamma = get_or<double>(j, "gamma", 0.0);
  if (j.contains("degradation")) p.degradation = j["degradation"];
  p.conditioned = get_or<bool>(j, "conditioned", false);
  if (j.contains("params")) p.params = j["params"];
  p.name = get_or<std::string>(j, "name", "");
  return p;
}

std::vector<PriorSpec> parse_priors(const json& j) {
  std::vector<PriorSpec> out;
  for (const auto& e : j) out.push_back(parse_prior(e));
  return out;
}

void parse_solver(const json& j, SolverConfig& s) {
  s.lambda = get_or<double>(j, "lambda", s.lambda);
  s.iters = get_or<std::size_t>(j, "iters", s.iters);
  if (j.contains("mode")) s.mode = mode_from_string(j["mode"].get<std::string>());
  if (j.contains("schedule")) {
    const json& sc = j["schedule"];
    const auto kind = get_or<std::string>(sc, "kind", "constant");
    if (kind == "constant") {
      s.schedule = StepSchedule::constant(get_or<double>(sc, "scale", 1.0));
    } else if (kind == "polynomial") {
      s.schedule = StepSchedule::polynomial(get_or<double>(sc, "gamma0", 1.0), get_or<double>(sc, "exponent", 0.75));
    } else {
      throw ConfigError("unknown schedule kind '" + kind + "'");
    }
  }
  if (j.contains("return_u") && !j["return_u"].is_null()) s.return_u = j["return_u"].get<bool>();
  s.parallel_priors = get_or<bool>(j, "parallel_priors", s.parallel_priors);
  s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
  if (j.contains("prox")) {
    try {
      s.prox = prox_method_from_string(j["prox"].get<std::string>());
    } catch (const ProxError& e) {
      throw ConfigError(e.what());
    }
  }
  s.cg_tol = get_or<double>(j, "cg_tol", s.cg_tol);
  s.cg_max_iters = get_or<std::size_t>(j, "cg_max_iters", s.cg_max_iters);
  s.f_samples = get_or<std::size_t>(j, "f_samples", s.f_samples);
  if (j.contains("red_form")) {
    const auto f = j["red_form"].get<std::string>();
    if (f == "restorer") s.red_form = RedForm::restorer;
    else if (f == "residual") s.red_form = RedForm::residual;
    else throw ConfigError("unknown red_form '" + f + "'");
  }
}

}  // namespace

Range parse_range(const json& j) {
  if (j.is_number()) return Range::point(j.get<double>());
  if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
  throw ConfigError("expected a number or a [lo, hi] pair, got " + j.dump());
}

Image read_mask(const fs::path& path) {
  const Image raw = io::read_image(path);
  Image mask(raw.height(), raw.width(), 1);
  for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = raw[p * raw.channels()] * 255.0 > 127.0 ? 1.0 : 0.0;
  return mask;
}

LinearOp build_operator(const json& j, const Shape& x_shape, Rng rng, const fs::path& base_dir) {
  const auto type = j.at("type").get<std::string>();
  if (type == "identity") return LinearOp::identity();
  if (type == "blur") {
    const double sigma = j.at("sigma").get<double>();
    const auto size = get_or<std::size_t>(j, "size", gaussian_support(sigma));
    return LinearOp::convolution(gaussian_kernel(sigma, size));
  }
  if (type == "kernel") return LinearOp::convolution(read_kernel_text(resolve(base_dir, j.at("path").get<std::string>())));
  if (type == "decimation") return LinearOp::decimation(j.at("factor").get<std::size_t>());
  if (type == "mask") {
    if (j.contains("path")) {
      Image m = read_mask(resolve(base_dir, j["path"].get<std::string>()));
      if (m.height() != x_shape.height || m.width() != x_shape.width) {
        throw ConfigError("mask " + j["path"].get<std::string>() + " does not match image size " + to_string(x_shape));
      }
      return LinearOp::mask(std::move(m));
    }
    DegradationSpec spec = DegradationSpec::random_mask(Range::point(j.at("drop_prob").get<double>()), Range::point(0));
    return sample(spec, x_shape, rng).linear();
  }
  if (type == "compose") {
    std::vector<LinearOp> ops;
    Shape s = x_shape;
    std::uint64_t i = 0;
    for (const auto& e : j.at("ops")) {
      ops.push_back(build_operator(e, s, rng.split(i++), base_dir));
      s = ops.back().output_shape(s);
    }
    return LinearOp::compose(std::move(ops));
  }
  throw ConfigError("unknown operator type '" + type + "'");
}

DegradationSpec parse_degradation(const json& j, const Shape& x_shape, const fs::path& base_dir) {
  const auto family = j.at("family").get<std::string>();
  const Range sigma = j.contains("noise_sigma") ? parse_range(j["noise_sigma"]) : Range::point(0.0);
  DegradationSpec spec;
  if (family == "fixed") {
    spec = DegradationSpec::fixed(build_operator(j.at("op"), x_shape, Rng(0), base_dir), get_or<double>(j, "sigma", 0.0));
  } else {
    switch (family_from_string(family)) {
      case Family::additive_noise: spec = DegradationSpec::additive_noise(sigma); break;
      case Family::blur: spec = DegradationSpec::blur(parse_range(j.at("blur_sigma")), sigma); break;
      case Family::decimation: spec = DegradationSpec::decimation(j.at("factor").get<std::size_t>(), sigma); break;
      case Family::mask:
        spec = j.contains("mask") ? DegradationSpec::mask(read_mask(resolve(base_dir, j["mask"].get<std::string>())), sigma)
                                  : DegradationSpec::random_mask(parse_range(j.at("drop_prob")), sigma);
        break;
      case Family::jpeg: spec = DegradationSpec::jpeg(parse_range(j.at("quality")), sigma); break;
      default: throw ConfigError("degradation family '" + family + "' cannot be sampled");
    }
  }
  spec.validate();
  return spec;
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c;
    c.base_dir = base_dir;
    c.version = get_or<int>(j, "version", -1);
    if (c.version != kSchemaVersion) {
      throw ConfigError("unsupported config version " + std::to_string(c.version) + " (expected " +
                        std::to_string(kSchemaVersion) + ")");
    }
    if (j.contains("problem")) {
      const json& p = j["problem"];
      if (p.contains("operator")) c.op = p["operator"];
      c.noise_sigma = get_or<double>(p, "noise_sigma", 0.0);
      if (c.noise_sigma < 0.0) throw ConfigError("problem.noise_sigma must be >= 0");
    }
    if (j.contains("priors")) c.priors = parse_priors(j["priors"]);
    if (j.contains("solver")) parse_solver(j["solver"], c.solver);
    if (j.contains("inputs")) c.inputs = expand_inputs(j["inputs"], base_dir);
    if (j.contains("outputs")) {
      const json& o = j["outputs"];
      c.output_dir = resolve(base_dir, o.is_string() ? o.get<std::string>() : o.at("dir").get<std::string>());
    } else {
      c.output_dir = resolve(base_dir, "out");
    }
    if (j.contains("fixedpoint")) {
      const json& f = j["fixedpoint"];
      c.fixedpoint.iters = get_or<std::size_t>(f, "iters", c.fixedpoint.iters);
      c.fixedpoint.prior = get_or<std::size_t>(f, "prior", c.fixedpoint.prior);
    }
    if (j.contains("probe")) {
      const json& p = j["probe"];
      c.probe.sigma_blur = get_or<std::vector<double>>(p, "sigma_blur", c.probe.sigma_blur);
      c.probe.sigma_noise = get_or<std::vector<double>>(p, "sigma_noise", c.probe.sigma_noise);
      c.probe.samples = get_or<std::size_t>(p, "samples", c.probe.samples);
      c.probe.prior = get_or<std::size_t>(p, "prior", c.probe.prior);
    }
    if (j.contains("bench")) {
      const json& b = j["bench"];
      if (b.contains("methods")) {
        c.bench.methods.clear();
        for (const auto& m : b["methods"]) c.bench.methods.push_back(method_from_string(m.get<std::string>()));
      }
      if (b.contains("prior_sets")) {
        for (const auto& s : b["prior_sets"]) {
          c.bench.prior_sets.push_back({s.at("name").get<std::string>(), parse_priors(s.at("priors"))});
        }
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

// ---------------------------------------------------------------- registry

std::vector<std::string> restorer_ids() {
  return {"wiener", "tv", "dct", "inpaint", "sr2", "sr3", "proj:box:<lo>:<hi>", "proj:ball:<center>:<radius>",
          "proj:sum:<total>", "remote:tcp:<host>:<port>", "remote:exec:<program>"};
}

std::shared_ptr<remote::RemoteHandle> Registry::remote_handle(const std::string& address) {
  std::lock_guard lock(mutex_);
  auto& h = remotes_[address];
  if (!h) {
    std::shared_ptr<remote::RemoteHandle> fresh = remote::open_remote(address, timeout_ms_);
    fresh->handshake();
    h = std::move(fresh);
  }
  return h;
}

RestorerPtr Registry::restorer(const std::string& id, const json& params) {
  try {
    if (id == "wiener") return std::make_shared<WienerRestorer>(get_or<double>(params, "snr", 100.0));
    if (id == "tv") {
      return std::make_shared<TvRestorer>(get_or<double>(params, "strength", 0.0),
                                          get_or<std::size_t>(params, "iters", 50),
                                          get_or<double>(params, "sigma_gain", 1.0));
    }
    if (id == "dct") {
      return std::make_shared<DctRestorer>(get_or<double>(params, "threshold", 0.0),
                                           get_or<double>(params, "sigma_gain", 2.0));
    }
    if (id == "inpaint") return std::make_shared<InpaintRestorer>(get_or<std::size_t>(params, "iters", 500));
    if (id.size() > 2 && id.rfind("sr", 0) == 0 && std::all_of(id.begin() + 2, id.end(), ::isdigit)) {
      return std::make_shared<SrRestorer>(std::stoul(id.substr(2)), get_or<double>(params, "snr", 100.0));
    }
    if (id.rfind("proj:", 0) == 0) {
      const auto parts = split(id, ':');
      if (parts.size() == 4 && parts[1] == "box") {
        return projection_restorer(ConvexSet::box(to_double(parts[2], id), to_double(parts[3], id)));
      }
      if (parts.size() == 4 && parts[1] == "ball") {
        return projection_restorer(ConvexSet::ball(to_double(parts[2], id), to_double(parts[3], id)));
      }
      if (parts.size() == 3 && parts[1] == "sum") return projection_restorer(ConvexSet::sum_constraint(to_double(parts[2], id)));
      throw ConfigError("bad projection id '" + id + "'");
    }
    if (id.rfind("remote:", 0) == 0) {
      const std::string address = id.substr(7);
      return std::make_shared<remote::RemoteRestorer>(remote_handle(address), address);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError("bad params for restorer '" + id + "': " + e.what());
  } catch (const Error& e) {
    if (id.rfind("remote:", 0) == 0) throw;
    throw ConfigError("restorer '" + id + "': " + e.what());
  }
  throw ConfigError("unknown restorer '" + id + "'");
}

DegradationSpec Registry::default_spec(const std::string& id) {
  Family family;
  if (id == "wiener") {
    family = Family::blur;
  } else if (id == "tv" || id == "dct" || id.rfind("proj:", 0) == 0) {
    if (id.rfind("proj:", 0) == 0) return DegradationSpec::fixed(LinearOp::identity(), 0.0);
    family = Family::additive_noise;
  } else if (id == "inpaint") {
    family = Family::mask;
  } else if (id.rfind("sr", 0) == 0) {
    return DegradationSpec::decimation(std::stoul(id.substr(2)), Range::point(0.0));
  } else if (id.rfind("remote:", 0) == 0) {
    const auto tag = remote_handle(id.substr(7))->capabilities()->family;
    family = tag == "any" ? Family::additive_noise : family_from_string(tag);
  } else {
    throw ConfigError("unknown restorer '" + id + "'");
  }
  switch (family) {
    case Family::blur: return DegradationSpec::blur({1.0, 2.0}, {0.001, 0.01});
    case Family::mask: return DegradationSpec::random_mask({0.1, 0.9}, Range::point(0.0));
    case Family::decimation: return DegradationSpec::decimation(2, Range::point(0.0));
    case Family::jpeg: return DegradationSpec::jpeg({20, 100}, Range::point(0.0));
    default: return DegradationSpec::additive_noise({0.01, 0.05});
  }
}

std::vector<PriorTerm> Registry::build_priors(const std::vector<PriorSpec>& specs, const LinearOp& A,
                                              const Shape& x_shape, const fs::path& base_dir) {
  std::vector<PriorTerm> out;
  for (const auto& s : specs) {
    RestorerPtr r = restorer(s.restorer, s.params);
    DegradationSpec spec;
    try {
      if (s.conditioned) {
        spec = DegradationSpec::fixed(A, 0.0);
      } else if (s.degradation) {
        spec = parse_degradation(*s.degradation, x_shape, base_dir);
      } else {
        spec = default_spec(s.restorer);
      }
      out.push_back(make_prior(std::move(r), std::move(spec), s.gamma, s.name.empty() ? s.restorer : s.name));
    } catch (const ConfigError&) {
      throw;
    } catch (const json::exception& e) {
      throw ConfigError("prior '" + s.restorer + "': " + e.what());
    } catch (const remote::ProtocolError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError("prior '" + s.restorer + "': " + e.what());
    }
  }
  return out;
}

}  // namespace fire::config
