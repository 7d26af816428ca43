#pragma once

#include <string>

#include "fire/image.hpp"
#include "fire/linear_op.hpp"

namespace fire {

/// f(x) = 1/2 ||A x - y||^2 weighted by lambda in prox_{lambda f}.
struct DataFit {
  LinearOp A;
  Image y;
  double lambda = 1.0;
  /// Shape of x (the clean image).
  Shape x_shape;

  static DataFit make(LinearOp A, Image y, double lambda);
  static DataFit make(LinearOp A, Image y, double lambda, Shape x_shape);

  double value(const Image& x) const;
  /// A^T (A x - y)
  Image gradient(const Image& x) const;
};

enum class ProxMethod { automatic, fft, mask, cg };

std::string to_string(ProxMethod m);
ProxMethod prox_method_from_string(const std::string& s);

class ProxError : public Error {
 public:
  using Error::Error;
};

/// CG stopped before reaching the requested tolerance.
class CgConvergenceError : public ProxError {
 public:
  CgConvergenceError(double residual, std::size_t iters);
  double residual() const { return residual_; }
  std::size_t iterations() const { return iters_; }

 private:
  double residual_;
  std::size_t iters_;
};

/// Exact prox for periodic convolution (and identity) via the DFT.
Image prox_fft(const DataFit& df, const Image& u);
/// Closed form for a mask operator.
Image prox_mask(const DataFit& df, const Image& u);

struct CgStats {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

/// Solve (lambda A^T A + I) x = lambda A^T y + u by conjugate gradients.
Image prox_cg(const DataFit& df, const Image& u, double tol = 1e-6, std::size_t max_iters = 200,
              CgStats* stats = nullptr);

/// Pick the exact closed form when available, CG otherwise.
Image prox(const DataFit& df, const Image& u, ProxMethod method = ProxMethod::automatic,
           double cg_tol = 1e-6, std::size_t cg_max_iters = 200);

/// Resolve `automatic` to the method prox() would use for A.
ProxMethod resolve_prox_method(const LinearOp& A, ProxMethod requested);

}  // namespace fire
