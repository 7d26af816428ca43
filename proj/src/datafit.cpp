#include "fire/datafit.hpp"

#include <cmath>

#include "fire/fourier.hpp"

namespace fire {

DataFit DataFit::make(LinearOp A, Image y, double lambda) {
  const Shape xs = A.input_shape(y.shape());
  return make(std::move(A), std::move(y), lambda, xs);
}

DataFit DataFit::make(LinearOp A, Image y, double lambda, Shape x_shape) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ProxError("lambda must be non-negative and finite");
  if (A.output_shape(x_shape) != y.shape()) {
    throw ShapeError("data fit: A maps " + to_string(x_shape) + " to " + to_string(A.output_shape(x_shape)) +
                     " but y is " + to_string(y.shape()));
  }
  return DataFit{std::move(A), std::move(y), lambda, x_shape};
}

double DataFit::value(const Image& x) const {
  const double r = l2_distance(A.apply(x), y);
  return 0.5 * r * r;
}

Image DataFit::gradient(const Image& x) const { return A.adjoint(A.apply(x) - y); }

std::string to_string(ProxMethod m) {
  switch (m) {
    case ProxMethod::automatic: return "auto";
    case ProxMethod::fft: return "fft";
    case ProxMethod::mask: return "mask";
    case ProxMethod::cg: return "cg";
  }
  return "?";
}

ProxMethod prox_method_from_string(const std::string& s) {
  if (s == "auto" || s == "automatic") return ProxMethod::automatic;
  if (s == "fft") return ProxMethod::fft;
  if (s == "mask") return ProxMethod::mask;
  if (s == "cg") return ProxMethod::cg;
  throw ProxError("unknown prox method '" + s + "'");
}

CgConvergenceError::CgConvergenceError(double residual, std::size_t iters)
    : ProxError("conjugate gradients did not converge: relative residual " + std::to_string(residual) +
                " after " + std::to_string(iters) + " iterations"),
      residual_(residual),
      iters_(iters) {}

Image prox_fft(const DataFit& df, const Image& u) {
  require_same_shape(u, Image(df.x_shape), "prox_fft");
  const std::size_t h = u.height(), w = u.width(), c = u.channels();
  auto t = df.A.transfer(h, w);
  if (!t || df.y.shape() != u.shape()) throw ProxError("prox_fft needs a convolution operator");
  if (df.lambda == 0.0) return u;
  Image out(u.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const Image yp = df.y.channel(ch);
    const Image up = u.channel(ch);
    auto Y = fourier::fft2(yp.values(), h, w);
    auto U = fourier::fft2(up.values(), h, w);
    for (std::size_t i = 0; i < Y.size(); ++i) {
      const auto& K = (*t)[i];
      U[i] = (df.lambda * std::conj(K) * Y[i] + U[i]) / (df.lambda * std::norm(K) + 1.0);
    }
    out.set_channel(ch, Image({h, w, 1}, fourier::ifft2_real(U, h, w)));
  }
  return out;
}

Image prox_mask(const DataFit& df, const Image& u) {
  const auto* m = std::get_if<MaskOp>(&df.A.variant());
  if (!m) throw ProxError("prox_mask needs a mask operator");
  require_same_shape(u, df.y, "prox_mask");
  const std::size_t c = u.channels();
  Image out(u.shape());
  for (std::size_t p = 0; p < u.height() * u.width(); ++p) {
    const double mv = m->mask[p];
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i = p * c + ch;
      out[i] = (df.lambda * mv * df.y[i] + u[i]) / (df.lambda * mv * mv + 1.0);
    }
  }
  return out;
}

Image prox_cg(const DataFit& df, const Image& u, double tol, std::size_t max_iters, CgStats* stats) {
  require_same_shape(u, Image(df.x_shape), "prox_cg");
  auto normal = [&](const Image& v) {
    Image out = df.A.adjoint(df.A.apply(v));
    out *= df.lambda;
    out += v;
    return out;
  };
  Image b = df.A.adjoint(df.y);
  b *= df.lambda;
  b += u;
  const double bnorm = l2_norm(b);
  Image x = u;
  Image r = b - normal(x);
  if (bnorm == 0.0) {
    if (stats) *stats = {0, 0.0};
    return Image(u.shape());
  }
  Image p = r;
  double rr = dot(r, r);
  std::size_t it = 0;
  double rel = std::sqrt(rr) / bnorm;
  while (rel > tol && it < max_iters) {
    const Image Ap = normal(p);
    const double alpha = rr / dot(p, Ap);
    x.axpy(alpha, p);
    r.axpy(-alpha, Ap);
    const double rr_new = dot(r, r);
    p *= rr_new / rr;
    p += r;
    rr = rr_new;
    ++it;
    rel = std::sqrt(rr) / bnorm;
  }
  if (stats) *stats = {it, rel};
  if (rel > tol) throw CgConvergenceError(rel, it);
  return x;
}

ProxMethod resolve_prox_method(const LinearOp& A, ProxMethod requested) {
  if (requested != ProxMethod::automatic) return requested;
  if (std::holds_alternative<MaskOp>(A.variant())) return ProxMethod::mask;
  if (A.transfer(1, 1)) return ProxMethod::fft;
  return ProxMethod::cg;
}

Image prox(const DataFit& df, const Image& u, ProxMethod method, double cg_tol, std::size_t cg_max_iters) {
  if (df.lambda == 0.0) {
    require_same_shape(u, Image(df.x_shape), "prox");
    return u;
  }
  switch (resolve_prox_method(df.A, method)) {
    case ProxMethod::fft: return prox_fft(df, u);
    case ProxMethod::mask: return prox_mask(df, u);
    default: return prox_cg(df, u, cg_tol, cg_max_iters);
  }
}

}  // namespace fire
