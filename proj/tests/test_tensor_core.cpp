#include <gtest/gtest.h>

#include <cmath>

#include "fire/metrics.hpp"
#include "helpers.hpp"

using namespace fire;
using fire::testing::random_image;

TEST(Psnr, IdenticalImagesGiveSentinel) {
  const Image x = random_image({8, 8, 3}, 1);
  EXPECT_EQ(psnr(x, x), kPsnrIdentical);
  EXPECT_EQ(psnr(x, x), 100.0);
}

TEST(Psnr, ConstantMse) {
  EXPECT_NEAR(psnr(Image(4, 4, 1, 0.5), Image(4, 4, 1, 0.0), 1.0), 6.0206, 1e-4);
}

TEST(Psnr, MatchesDoubleLoopMse) {
  const Image a = random_image({8, 8, 1}, 2), b = random_image({8, 8, 1}, 3);
  double s = 0.0;
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) s += (a.at(r, c) - b.at(r, c)) * (a.at(r, c) - b.at(r, c));
  const double expected = 10.0 * std::log10(1.0 / (s / 64.0));
  EXPECT_NEAR(psnr(a, b), expected, 1e-9);
  EXPECT_NEAR(psnr(a, b), psnr(b, a), 1e-12);
  EXPECT_NEAR(psnr(a, b, 2.0), expected + 20.0 * std::log10(2.0), 1e-9);
}

TEST(Psnr, Errors) {
  EXPECT_THROW(psnr(Image(4, 4), Image(4, 5)), ShapeError);
  EXPECT_THROW(psnr(Image(4, 4), Image(4, 4), 0.0), Error);
}

namespace {

// Literal SSIM: Gaussian-weighted local statistics at every valid position.
double ssim_oracle(const Image& x, const Image& y) {
  const int n = 11;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double w[11][11], wsum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * sigma * sigma));
      wsum += w[i][j];
    }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t ch = 0; ch < x.channels(); ++ch)
    for (std::size_t r = 0; r + n <= x.height(); ++r)
      for (std::size_t c = 0; c + n <= x.width(); ++c) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const double a = x.at(r + i, c + j, ch), b = y.at(r + i, c + j, ch), ww = w[i][j] / wsum;
            mx += ww * a;
            my += ww * b;
            sxx += ww * a * a;
            syy += ww * b * b;
            sxy += ww * a * b;
          }
        sxx -= mx * mx;
        syy -= my * my;
        sxy -= mx * my;
        total += ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
        ++count;
      }
  return total / static_cast<double>(count);
}

}  // namespace

TEST(Ssim, IdentityIsOne) {
  const Image x = random_image({16, 16, 1}, 4);
  EXPECT_NEAR(ssim(x, x), 1.0, 1e-12);
}

TEST(Ssim, ComplementScoresBelowOne) {
  const Image ref = random_image({16, 16, 1}, 5);
  Image inv = Image(ref.shape(), 1.0) - ref;
  EXPECT_LT(ssim(inv, ref), 1.0);
}

TEST(Ssim, MatchesLiteralFormula) {
  const Image a = random_image({32, 32, 1}, 6);
  Image b = a;
  const Image n = random_image({32, 32, 1}, 7, -0.2, 0.2);
  b += n;
  EXPECT_NEAR(ssim(a, b), ssim_oracle(a, b), 1e-6);
  const Image c = random_image({20, 24, 3}, 8), d = random_image({20, 24, 3}, 9);
  EXPECT_NEAR(ssim(c, d), ssim_oracle(c, d), 1e-6);
}

TEST(Ssim, SmallerThanWindowThrows) { EXPECT_THROW(ssim(Image(10, 10), Image(10, 10)), ShapeError); }

TEST(L2Norm, SmallCases) {
  EXPECT_EQ(l2_norm(Image(3, 3)), 0.0);
  EXPECT_EQ(l2_norm(Image(1, 1, 1, 3.0)), 3.0);
  EXPECT_EQ(l2_norm(Image(2, 2, 1, 1.0)), 2.0);
}

TEST(ImageOps, ArithmeticAndShapes) {
  Image a(2, 3, 1, 1.0), b(2, 3, 1, 2.0);
  EXPECT_EQ((a + b)[5], 3.0);
  EXPECT_EQ((b - a)[0], 1.0);
  EXPECT_EQ((2.0 * b)[1], 4.0);
  a.axpy(0.5, b);
  EXPECT_EQ(a[2], 2.0);
  EXPECT_EQ(dot(a, b), 24.0);
  EXPECT_THROW(a += Image(3, 2), ShapeError);
  EXPECT_THROW(Image(Shape{2, 2, 1}, std::vector<double>(3)), ShapeError);
  EXPECT_EQ(Image(2, 2, 1, 2.0).clamped()[0], 1.0);
}

TEST(ImageOps, Channels) {
  Image x = random_image({4, 5, 3}, 10);
  const Image g = x.channel(1);
  EXPECT_EQ(g.shape(), (Shape{4, 5, 1}));
  EXPECT_EQ(g.at(2, 3), x.at(2, 3, 1));
  Image y(x.shape());
  for (std::size_t ch = 0; ch < 3; ++ch) y.set_channel(ch, x.channel(ch));
  EXPECT_EQ(x, y);
}

TEST(Rng, EqualSeedsGiveEqualStreams) {
  Rng a(42), b(42);
  for (int i = 0; i < 10000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  Rng c(43);
  Rng d(42);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += c.next_u64() == d.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(Rng, SplitsDependOnKeyOnly) {
  Rng a(7);
  const Rng s1 = a.split("noise");
  a.next_u64();
  a.next_u64();
  const Rng s2 = a.split("noise");
  EXPECT_EQ(s1.key(), s2.key());
  EXPECT_NE(a.split("noise").key(), a.split("mask").key());
  EXPECT_NE(a.split(std::uint64_t{0}).key(), a.split(std::uint64_t{1}).key());
}

TEST(Rng, Distributions) {
  Rng r(3);
  double s = 0, s2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.03);
  EXPECT_NEAR(s2 / n, 1.0, 0.05);
  for (int i = 0; i < 1000; ++i) {
    const auto k = r.uniform_int(-2, 3);
    ASSERT_GE(k, -2);
    ASSERT_LE(k, 3);
  }
}
