#include "blindloom/metrics.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace blindloom;
using blindloom::testing::random_frame;
using blindloom::testing::random_image;

namespace {

// Direct per-window SSIM with an explicitly normalised 11x11 Gaussian.
double brute_ssim(const Image& a, const Image& b) {
  constexpr int r = 5;
  double w[11][11];
  double total = 0.0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) total += w[i + r][j + r] = std::exp(-(i * i + j * j) / (2.0 * 1.5 * 1.5));
  for (auto& row : w)
    for (double& x : row) x /= total;
  const double c1 = std::pow(0.01 * 255.0, 2);
  const double c2 = std::pow(0.03 * 255.0, 2);
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index y = r; y + r < a.rows(); ++y) {
    for (Eigen::Index x = r; x + r < a.cols(); ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = -r; i <= r; ++i) {
        for (int j = -r; j <= r; ++j) {
          const double k = w[i + r][j + r];
          const double va = a(y + i, x + j);
          const double vb = b(y + i, x + j);
          ma += k * va;
          mb += k * vb;
          saa += k * va * va;
          sbb += k * vb * vb;
          sab += k * va * vb;
        }
      }
      const double va = saa - ma * ma;
      const double vb = sbb - mb * mb;
      const double cov = sab - ma * mb;
      sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return sum / count;
}

}  // namespace

TEST(Psnr, IdenticalFramesAreInfinite) {
  const Frame f = random_frame(3, 8, 8, 1);
  EXPECT_TRUE(std::isinf(psnr(f, f)));
  EXPECT_GT(psnr(f, f), 0.0);
}

TEST(Psnr, UnitMse) {
  const Frame a(1, 16, 16, 100.0);
  const Frame b(1, 16, 16, 101.0);
  EXPECT_NEAR(psnr(a, b), 48.1308, 1e-4);
}

TEST(Psnr, FullScaleErrorIsZeroDecibels) {
  EXPECT_NEAR(psnr(Frame(1, 4, 4, 0.0), Frame(1, 4, 4, 255.0)), 0.0, 1e-12);
}

TEST(Psnr, PoolsSquaredErrorOverChannels) {
  Frame a(2, 4, 4, 10.0);
  Frame b = a;
  b.planes[1].setConstant(12.0);
  EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(255.0 * 255.0 / 2.0), 1e-10);
}

TEST(Psnr, ShapeMismatchThrows) {
  EXPECT_THROW(psnr(Frame(1, 4, 4), Frame(1, 4, 5)), std::invalid_argument);
  EXPECT_THROW(psnr(Frame(1, 4, 4), Frame(2, 4, 4)), std::invalid_argument);
}

TEST(Ssim, IdenticalIsOne) {
  const Frame f = random_frame(1, 20, 20, 2);
  EXPECT_NEAR(ssim(f, f), 1.0, 1e-12);
}

TEST(Ssim, ConstantVersusOffsetIsNearZero) {
  EXPECT_LT(ssim(Frame(1, 16, 16, 0.0), Frame(1, 16, 16, 255.0)), 0.05);
}

TEST(Ssim, Symmetric) {
  const Frame a = random_frame(1, 16, 16, 3);
  const Frame b = random_frame(1, 16, 16, 4);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
}

TEST(Ssim, MatchesDirectWindowSum) {
  const Image a = random_image(17, 15, 5);
  const Image b = (a + random_image(17, 15, 6, -30.0, 30.0)).cwiseMax(0.0).cwiseMin(255.0).eval();
  EXPECT_NEAR(ssim(a, b), brute_ssim(a, b), 1e-9);
}

TEST(Ssim, AveragesChannels) {
  Frame a;
  Frame b;
  a.planes = {random_image(12, 12, 7), random_image(12, 12, 8)};
  b.planes = {random_image(12, 12, 9), a.planes[1]};
  EXPECT_NEAR(ssim(a, b), 0.5 * (brute_ssim(a.planes[0], b.planes[0]) + 1.0), 1e-9);
}

TEST(Ssim, FrameSmallerThanWindowThrows) {
  EXPECT_THROW(ssim(Frame(1, 10, 20), Frame(1, 10, 20)), std::invalid_argument);
  EXPECT_NO_THROW(ssim(Frame(1, 11, 11), Frame(1, 11, 11)));
}

TEST(PerFrame, LengthsAndMismatch) {
  FrameSequence a;
  a.frames = {Frame(1, 12, 12, 1.0), Frame(1, 12, 12, 2.0)};
  FrameSequence b = a;
  b.frames[1].planes[0].setConstant(3.0);
  const auto p = psnr_per_frame(a, b);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_TRUE(std::isinf(p[0]));
  EXPECT_NEAR(p[1], 48.1308, 1e-4);
  EXPECT_EQ(ssim_per_frame(a, b).size(), 2u);
  b.frames.pop_back();
  EXPECT_THROW(psnr_per_frame(a, b), std::invalid_argument);
  EXPECT_THROW(ssim_per_frame(a, b), std::invalid_argument);
}

TEST(Summary, MeanAndMedian) {
  EXPECT_DOUBLE_EQ(mean({1.0, 2.0, 6.0}), 3.0);
  EXPECT_DOUBLE_EQ(median({5.0, 1.0, 3.0}), 3.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_TRUE(std::isnan(mean({})));
  EXPECT_TRUE(std::isnan(median({})));
}

TEST(Summary, FormatMetric) {
  EXPECT_EQ(format_metric(1.5), "1.500000");
  EXPECT_EQ(format_metric(-0.0000004), "-0.000000");
  EXPECT_EQ(format_metric(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_metric(-std::numeric_limits<double>::infinity()), "-inf");
}
