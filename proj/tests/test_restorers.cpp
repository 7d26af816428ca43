#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fire/config.hpp"
#include "fire/metrics.hpp"
#include "fire/restorers.hpp"
#include "helpers.hpp"

using namespace fire;
using fire::testing::dense;
using fire::testing::random_image;
using fire::testing::random_normal;
using fire::testing::unvec;
using fire::testing::vec;

TEST(Wiener, DeltaKernelLargeSnrIsIdentity) {
  const Image y = random_image({8, 8, 1}, 1);
  EXPECT_LE(max_abs_diff(wiener_deconv(y, Kernel::delta(), 1e12), y), 1e-10);
}

TEST(Wiener, ConstantInputScaledByDcGain) {
  const Image y(8, 8, 1, 0.6);
  const double snr = 10.0;
  const Image x = wiener_deconv(y, gaussian_kernel(1.0, 5), snr);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], 0.6 / (1.0 + 1.0 / snr), 1e-12);
}

TEST(Wiener, MatchesDenseNormalEquations) {
  const Kernel k = gaussian_kernel(1.2, 5);
  const double snr = 50.0;
  const Image y = random_image({16, 16, 1}, 2);
  const Eigen::MatrixXd K = dense(LinearOp::convolution(k), y.shape());
  const Eigen::MatrixXd M = K.transpose() * K + Eigen::MatrixXd::Identity(256, 256) / snr;
  const Eigen::VectorXd x = M.ldlt().solve(K.transpose() * vec(y));
  EXPECT_LE(max_abs_diff(wiener_filter(y, k, snr), unvec(x, y.shape())), 1e-7);
}

TEST(Wiener, RejectsBadSnr) { EXPECT_THROW(wiener_deconv(Image(4, 4), Kernel::delta(), 0.0), Error); }

TEST(Tv, ZeroStrengthAndConstantImagesAreFixed) {
  const Image y = random_image({8, 8, 2}, 3);
  EXPECT_EQ(tv_denoise(y, 0.0, 50), y);
  const Image c(8, 8, 1, 0.3);
  EXPECT_LE(max_abs_diff(tv_denoise(c, 0.5, 50), c), 1e-15);
}

TEST(Tv, StepShrinkMatchesLongRun) {
  Image y(8, 8);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 4; c < 8; ++c) y.at(r, c) = 1.0;
  y *= 0.6;
  y += Image(8, 8, 1, 0.2);
  auto amplitude = [](const Image& x) { return x.at(3, 4) - x.at(3, 3); };
  const double strength = 0.1;
  const double a = amplitude(tv_denoise(y, strength, 500));
  const double ref = amplitude(tv_denoise(y, strength, 5000));
  EXPECT_LT(a, 0.6);
  EXPECT_NEAR(a, ref, 1e-4);
  // Prox of a 1-D step: each side moves by strength * (jump length) / (side area).
  EXPECT_NEAR(ref, 0.6 - 2.0 * strength * 8.0 / 32.0, 1e-4);
}

TEST(Dct, ZeroThresholdAndConstantsAreFixed) {
  const Image y = random_image({8, 12, 1}, 4);
  EXPECT_LE(max_abs_diff(dct_threshold(y, 0.0), y), 1e-9);
  const Image c(8, 8, 1, 0.7);
  EXPECT_LE(max_abs_diff(dct_threshold(c, 0.3), c), 1e-12);
}

TEST(Dct, SingleCoefficientIsSoftThresholded) {
  const std::size_t h = 8, w = 8;
  std::vector<double> coef(h * w, 0.0);
  coef[0] = 0.5 * 8.0;
  coef[1 * w + 2] = 0.3;
  const Image y({h, w, 1}, fourier::idct2(coef, h, w));
  const Image x = dct_threshold(y, 0.1);
  const auto out = fourier::dct2(x.values(), h, w);
  EXPECT_NEAR(out[0], 4.0, 1e-9);
  EXPECT_NEAR(out[1 * w + 2], 0.2, 1e-9);
  for (std::size_t i = 1; i < out.size(); ++i)
    if (i != 1 * w + 2) EXPECT_NEAR(out[i], 0.0, 1e-9);
}

TEST(Inpaint, FullMaskIsIdentity) {
  const Image y = random_image({6, 6, 1}, 5);
  EXPECT_EQ(harmonic_inpaint(y, Image(6, 6, 1, 1.0), 100), y);
}

TEST(Inpaint, SingleHoleIsNeighbourMean) {
  Image y = random_image({5, 5, 1}, 6);
  Image m(5, 5, 1, 1.0);
  m.at(2, 2) = 0.0;
  y.at(2, 2) = 0.0;
  const Image x = harmonic_inpaint(y, m, 100);
  EXPECT_NEAR(x.at(2, 2), (y.at(1, 2) + y.at(3, 2) + y.at(2, 1) + y.at(2, 3)) / 4.0, 1e-12);
}

TEST(Inpaint, MatchesDenseLaplaceSolve) {
  const std::size_t n = 8;
  const Image y0 = random_image({n, n, 1}, 7);
  Rng rng(8);
  Image m(n, n, 1, 1.0);
  for (auto& v : m.values()) v = rng.uniform() < 0.3 ? 0.0 : 1.0;
  Image y = y0;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= m[i];

  std::vector<long> index(n * n, -1);
  long count = 0;
  for (std::size_t i = 0; i < n * n; ++i)
    if (m[i] < 0.5) index[i] = count++;
  ASSERT_GT(count, 0);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(count, count);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(count);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) {
      const long row = index[r * n + c];
      if (row < 0) continue;
      L(row, row) = 4.0;
      const std::size_t nb[4] = {((r + n - 1) % n) * n + c, ((r + 1) % n) * n + c, r * n + (c + n - 1) % n,
                                 r * n + (c + 1) % n};
      for (std::size_t q : nb) {
        if (index[q] >= 0)
          L(row, index[q]) -= 1.0;
        else
          b(row) += y[q];
      }
    }
  const Eigen::VectorXd z = L.fullPivLu().solve(b);
  InpaintStats stats;
  const Image x = harmonic_inpaint(y, m, 10000, 1e-6, &stats);
  EXPECT_LE(stats.residual, 1e-6);
  for (std::size_t i = 0; i < n * n; ++i) {
    if (index[i] >= 0)
      EXPECT_NEAR(x[i], z(index[i]), 1e-5);
    else
      EXPECT_EQ(x[i], y[i]);
  }
}

TEST(Inpaint, NothingObservedThrows) {
  EXPECT_THROW(harmonic_inpaint(Image(4, 4), Image(4, 4), 10), Error);
}

TEST(Sr, ConstantAndZero) {
  const Image c(6, 5, 1, 0.4);
  const Image up = sr_upsample(c, 2);
  ASSERT_EQ(up.shape(), (Shape{12, 10, 1}));
  EXPECT_LE(max_abs_diff(up, Image(12, 10, 1, 0.4)), 1e-6);
  EXPECT_EQ(sr_upsample(Image(4, 4, 3), 3), Image(12, 12, 3));
  EXPECT_THROW(sr_upsample(c, 1), Error);
}

TEST(Sr, LowFrequencyCosineRoundTrip) {
  Image x(64, 64);
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 0; c < 64; ++c)
      x.at(r, c) = 0.5 + 0.3 * std::cos(2.0 * std::numbers::pi * (2.0 * r + 1.0 * c) / 64.0);
  const Image low = LinearOp::decimation(2).apply(x);
  EXPECT_GE(psnr(sr_upsample(low, 2), x), 30.0);
}

namespace {

std::vector<ConvexSet> test_sets(const Shape& s) {
  return {ConvexSet::box(0.2, 0.8), ConvexSet::ball(0.5, 0.7), ConvexSet::ball(random_image(s, 99), 0.4),
          ConvexSet::hyperplane(random_normal(s, 98), 0.3), ConvexSet::sum_constraint(4.0)};
}

Image fd_half_gradient(const ConvexSet& C, const Image& x, double h) {
  Image g(x.shape());
  Image xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = C.squared_distance(xp);
    xp[i] = x[i] - h;
    const double fm = C.squared_distance(xp);
    xp[i] = x[i];
    g[i] = 0.5 * (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST(Projection, SimpleCases) {
  const Image inside = random_image({4, 4, 1}, 10, 0.1, 0.9);
  EXPECT_EQ(ConvexSet::box(0, 1).project(inside), inside);
  Image x = random_normal({4, 4, 1}, 11);
  x *= 2.0 / l2_norm(x);
  EXPECT_LE(max_abs_diff(ConvexSet::ball(0.0, 1.0).project(x), 0.5 * x), 1e-15);
  const Image r = random_image({4, 4, 1}, 12, -0.5, 1.5);
  EXPECT_EQ(ConvexSet::box(0.2, 0.8).project(r), r.clamped(0.2, 0.8));
  const Image p = ConvexSet::sum_constraint(3.0).project(r);
  EXPECT_NEAR(mean(p) * 16.0, 3.0, 1e-12);
}

TEST(Projection, InvalidParametersThrow) {
  EXPECT_THROW(ConvexSet::box(0.8, 0.2), Error);
  EXPECT_THROW(ConvexSet::ball(0.0, 0.0), Error);
  EXPECT_THROW(ConvexSet::ball(0.0, -1.0), Error);
}

TEST(Projection, Idempotent) {
  const Shape s{5, 4, 1};
  for (const auto& C : test_sets(s))
    for (int t = 0; t < 10; ++t) {
      const Image p = C.project(random_normal(s, 200 + t));
      EXPECT_LE(max_abs_diff(C.project(p), p), 1e-12) << C.describe();
    }
}

TEST(Projection, ResidualIsHalfGradientOfSquaredDistance) {
  const Shape s{4, 4, 1};
  for (const auto& C : test_sets(s)) {
    const ProjectionRestorer T(C);
    for (int t = 0; t < 50; ++t) {
      const Image x = random_image(s, 300 + t, -0.5, 1.5);
      const Image residual = x - T.restore(x, Degradation{});
      EXPECT_LE(l2_distance(residual, fd_half_gradient(C, x, 1e-4)), 1e-4) << C.describe();
    }
  }
}

TEST(Projection, GradientIsTwoLipschitz) {
  const Shape s{4, 4, 1};
  for (const auto& C : test_sets(s))
    for (int t = 0; t < 50; ++t) {
      const Image x = random_image(s, 400 + t, -1.0, 2.0), y = random_image(s, 500 + t, -1.0, 2.0);
      const Image gx = 2.0 * (x - C.project(x)), gy = 2.0 * (y - C.project(y));
      EXPECT_LE(l2_distance(gx, gy), 2.0 * l2_distance(x, y) + 1e-6);
    }
}

TEST(Restorer, ClampsAndValidatesPairing) {
  const Image y = random_image({8, 8, 1}, 13, -0.5, 1.5);
  const Degradation noise(LinearOp::identity(), 0.05);
  for (const Image& out : {TvRestorer(0.1, 20).restore(y, noise), DctRestorer(0.1).restore(y, noise)})
    for (double v : out.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  EXPECT_THROW(make_prior(std::make_shared<WienerRestorer>(100.0),
                          DegradationSpec::additive_noise({0.0, 0.1}), 0.5),
               Error);
  EXPECT_THROW(make_prior(std::make_shared<TvRestorer>(0.1, 10), DegradationSpec::additive_noise({0.0, 0.1}), 1.5),
               Error);
  EXPECT_THROW(InpaintRestorer().restore(y, noise), Error);
  EXPECT_THROW(SrRestorer(3).restore(Image(4, 4), Degradation(LinearOp::decimation(2), 0.0)), Error);
}

TEST(Restorer, WienerReadsSampledKernel) {
  const Image x = random_image({16, 16, 1}, 14);
  const Degradation d(LinearOp::gaussian_blur(1.3), 0.0);
  const Image out = WienerRestorer(200.0).restore(d.forward(x), d);
  const Kernel& k = std::get<ConvolutionOp>(d.linear().variant()).kernel;
  EXPECT_LE(max_abs_diff(out, wiener_deconv(d.forward(x), k, 200.0)), 1e-12);
}

class FixedPointContract : public ::testing::TestWithParam<std::string> {};

// The drift bound is a regression pin: repeated stochastic restoration adds a
// bias per step, so PSNR against the start decays roughly like -20 log10(k).
TEST_P(FixedPointContract, SmoothImageIsNearlyFixedAndStable) {
  config::Registry registry;
  const std::string id = GetParam();
  const Image smooth = tv_denoise(fire::testing::test_image(), 0.15, 300);
  DegradationSpec spec = registry.default_spec(id);
  spec.noise_sigma = Range::point(spec.noise_sigma.lo);
  const PriorTerm term = make_prior(registry.restorer(id), spec, 0.5);

  Rng rng(21);
  auto T = [&](const Image& x, std::uint64_t k) {
    Rng r = rng.split(k);
    const Degradation d = sample(term.spec, x.shape(), r);
    return term.restorer->restore(d.apply(x, r), d);
  };
  EXPECT_LE(l2_distance(T(smooth, 0), smooth) / l2_norm(smooth), 0.1);

  Image x = smooth;
  double lo = 1e9, hi = -1e9;
  for (std::uint64_t k = 1; k <= 20; ++k) {
    x = T(x, k);
    ASSERT_TRUE(x.all_finite());
    const double p = psnr(x, smooth);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  EXPECT_LE(hi - lo, 20.0) << id;
  EXPECT_GE(lo, 17.0) << id;
}

INSTANTIATE_TEST_SUITE_P(ShippedPairs, FixedPointContract,
                         ::testing::Values("wiener", "tv", "dct", "inpaint", "sr2", "proj:box:0:1"),
                         [](const auto& info) {
                           std::string s = info.param;
                           for (auto& c : s)
                             if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
                           return s;
                         });
