#include "fire/kernel.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fire/image.hpp"

namespace fire {

double Kernel::sum() const { return std::accumulate(taps.begin(), taps.end(), 0.0); }

Kernel Kernel::delta() { return Kernel{}; }

Kernel gaussian_kernel(double sigma, std::size_t size) {
  if (!(sigma > 0.0)) throw Error("gaussian_kernel: sigma must be positive");
  if (size == 0 || size % 2 == 0) throw Error("gaussian_kernel: size must be odd and positive");
  const auto half = static_cast<long>(size / 2);
  std::vector<double> g(size);
  for (long i = -half; i <= half; ++i) {
    g[static_cast<std::size_t>(i + half)] = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
  }
  Kernel k{size, size, std::vector<double>(size * size)};
  double total = 0.0;
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      k.taps[r * size + c] = g[r] * g[c];
      total += k.taps[r * size + c];
    }
  }
  // For tiny sigma every off-centre sample underflows to zero and the
  // kernel is an exact delta.
  for (auto& t : k.taps) t /= total;
  return k;
}

std::size_t gaussian_support(double sigma) {
  return 2 * static_cast<std::size_t>(std::ceil(3.0 * std::max(sigma, 0.0))) + 1;
}

Kernel read_kernel_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open kernel file " + path.string());
  Kernel k{0, 0, {}};
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) throw Error("kernel file " + path.string() + ": non-numeric entry");
    if (row.empty()) continue;
    if (k.cols == 0) k.cols = row.size();
    if (row.size() != k.cols) throw Error("kernel file " + path.string() + ": ragged rows");
    k.taps.insert(k.taps.end(), row.begin(), row.end());
    ++k.rows;
  }
  if (k.rows == 0) throw Error("kernel file " + path.string() + " is empty");
  return k;
}

void write_kernel_text(const std::filesystem::path& path, const Kernel& k) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write kernel file " + path.string());
  out.precision(17);
  for (std::size_t r = 0; r < k.rows; ++r) {
    for (std::size_t c = 0; c < k.cols; ++c) out << (c ? " " : "") << k.at(r, c);
    out << '\n';
  }
}

}  // namespace fire
