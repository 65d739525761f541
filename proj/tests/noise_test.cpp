#include "blindloom/noise.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace blindloom;
using blindloom::testing::constant_frame;
using blindloom::testing::random_frame;

namespace {

FrameSequence constant_sequence(std::size_t n, Eigen::Index size, double value) {
  FrameSequence s;
  for (std::size_t i = 0; i < n; ++i) s.frames.push_back(constant_frame(size, size, value));
  return s;
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;
  long positive = 0;
  long negative = 0;
  long count = 0;
};

Moments residual_moments(const FrameSequence& noisy, const FrameSequence& clean) {
  Moments m;
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const Image d = noisy[i].planes[0] - clean[i].planes[0];
    for (Eigen::Index k = 0; k < d.size(); ++k) {
      const double x = d.data()[k];
      s += x;
      s2 += x * x;
      m.positive += x > 0;
      m.negative += x < 0;
    }
    m.count += d.size();
  }
  m.mean = s / static_cast<double>(m.count);
  m.std = std::sqrt(s2 / static_cast<double>(m.count) - m.mean * m.mean);
  return m;
}

bool integer_in_range(const FrameSequence& seq) {
  for (const auto& f : seq.frames)
    for (const auto& p : f.planes)
      if (!((p >= 0.0).all() && (p <= 255.0).all() && (p == p.round()).all())) return false;
  return true;
}

const std::vector<std::string> kAllModels = {"awgn:20", "mg:0.3", "cg:25", "ir:0.1", "jpeg:25:60"};

}  // namespace

TEST(Awgn, EmpiricalStdWithinFivePercent) {
  const auto clean = constant_sequence(10, 320, 128.0);
  const auto noisy = apply_noise(NoiseModel{Awgn{20.0}, 3}, clean);
  const Moments m = residual_moments(noisy, clean);
  ASSERT_GE(m.count, 1000000);
  EXPECT_NEAR(m.std, 20.0, 1.0);
}

TEST(Awgn, ZeroMedianSignTest) {
  const auto clean = constant_sequence(10, 320, 128.0);
  const auto noisy = apply_noise(NoiseModel{Awgn{20.0}, 4}, clean);
  const Moments m = residual_moments(noisy, clean);
  const double n = static_cast<double>(m.positive + m.negative);
  EXPECT_LE(std::abs(static_cast<double>(m.positive - m.negative)), 5.0 * std::sqrt(n));
}

TEST(Awgn, IndependentAcrossFrames) {
  const auto clean = constant_sequence(2, 256, 128.0);
  const auto noisy = apply_noise(NoiseModel{Awgn{20.0}, 5}, clean);
  const Image a = noisy[0].planes[0] - 128.0;
  const Image b = noisy[1].planes[0] - 128.0;
  const double corr = (a * b).sum() / std::sqrt((a * a).sum() * (b * b).sum());
  EXPECT_LT(std::abs(corr), 0.02);
}

TEST(CorrelatedGaussian, BoxBlurShrinksStdByThree) {
  // A 3x3 box average of iid noise has std sigma / 3.
  const auto clean = constant_sequence(10, 320, 128.0);
  const auto noisy = apply_noise(NoiseModel{CorrelatedGaussian{25.0}, 6}, clean);
  EXPECT_NEAR(residual_moments(noisy, clean).std, 25.0 / 3.0, 0.05 * 25.0 / 3.0);
}

TEST(CorrelatedGaussian, NeighboursAreCorrelated) {
  const auto clean = constant_sequence(1, 256, 128.0);
  const Image d = apply_noise(NoiseModel{CorrelatedGaussian{25.0}, 7}, clean)[0].planes[0] - 128.0;
  const Image a = d.block(0, 0, 256, 255);
  const Image b = d.block(0, 1, 256, 255);
  const double corr = (a * b).sum() / std::sqrt((a * a).sum() * (b * b).sum());
  // Horizontal neighbours share 6 of 9 box taps.
  EXPECT_NEAR(corr, 6.0 / 9.0, 0.03);
}

TEST(ImpulseRandom, ZeroProbabilityIsRoundedClean) {
  FrameSequence clean;
  clean.frames.push_back(random_frame(1, 16, 16, 8));
  clean.frames.push_back(random_frame(1, 16, 16, 9));
  const auto noisy = apply_noise(NoiseModel{ImpulseRandom{0.0}, 1}, clean);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_TRUE((noisy[i].planes[0] == clean[i].planes[0].round()).all());
}

TEST(ImpulseRandom, ReplacementFraction) {
  const auto clean = constant_sequence(4, 256, 77.0);
  const auto noisy = apply_noise(NoiseModel{ImpulseRandom{0.1}, 2}, clean);
  double changed = 0.0;
  for (const auto& f : noisy.frames) changed += (f.planes[0] != 77.0).cast<double>().sum();
  // A replacement lands on 77 itself with probability about 1/255.
  EXPECT_NEAR(changed / (4.0 * 256 * 256), 0.1 * 254.0 / 255.0, 0.003);
}

TEST(MultiplicativeGaussian, ZeroFrameStaysZero) {
  const auto clean = constant_sequence(3, 32, 0.0);
  const auto noisy = apply_noise(NoiseModel{MultiplicativeGaussian{0.3}, 3}, clean);
  for (const auto& f : noisy.frames) EXPECT_EQ(f.planes[0].abs().maxCoeff(), 0.0);
}

TEST(MultiplicativeGaussian, RelativeStd) {
  const auto clean = constant_sequence(10, 320, 100.0);
  const auto noisy = apply_noise(NoiseModel{MultiplicativeGaussian{0.3}, 4}, clean);
  // Clipping at 0 and 255 is 3.3 and 5 sigma away, so it barely matters.
  EXPECT_NEAR(residual_moments(noisy, clean).std, 30.0, 1.5);
}

TEST(NoiseModels, OutputsAreIntegersInRange) {
  FrameSequence clean;
  for (int i = 0; i < 3; ++i) clean.frames.push_back(random_frame(3, 20, 21, 40 + i));
  for (const auto& spec : kAllModels) {
    EXPECT_TRUE(integer_in_range(apply_noise(NoiseModel{parse_noise(spec), 11}, clean))) << spec;
  }
}

TEST(NoiseModels, SeedDeterminism) {
  FrameSequence clean;
  for (int i = 0; i < 2; ++i) clean.frames.push_back(random_frame(1, 24, 24, 50 + i));
  for (const auto& spec : kAllModels) {
    const auto a = apply_noise(NoiseModel{parse_noise(spec), 99}, clean);
    const auto b = apply_noise(NoiseModel{parse_noise(spec), 99}, clean);
    const auto c = apply_noise(NoiseModel{parse_noise(spec), 100}, clean);
    bool differs = false;
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_TRUE((a[i].planes[0] == b[i].planes[0]).all()) << spec;
      differs |= !(a[i].planes[0] == c[i].planes[0]).all();
    }
    EXPECT_TRUE(differs) << spec;
  }
}

TEST(NoiseModels, FrameNoiseDependsOnlyOnIndex) {
  FrameSequence clean = constant_sequence(3, 16, 128.0);
  const auto whole = apply_noise(NoiseModel{Awgn{20.0}, 5}, clean);
  const Frame single = apply_noise(NoiseModel{Awgn{20.0}, 5}, clean[2], 2);
  EXPECT_TRUE((whole[2].planes[0] == single.planes[0]).all());
}

TEST(NoiseModels, InvalidParametersRejected) {
  EXPECT_THROW(validate(NoiseModel{Awgn{0.0}, 0}), std::invalid_argument);
  EXPECT_THROW(validate(NoiseModel{MultiplicativeGaussian{-0.1}, 0}), std::invalid_argument);
  EXPECT_THROW(validate(NoiseModel{ImpulseRandom{1.5}, 0}), std::invalid_argument);
  EXPECT_THROW(validate(NoiseModel{JpegGaussian{25.0, 0}, 0}), std::invalid_argument);
  EXPECT_THROW(validate(NoiseModel{JpegGaussian{25.0, 101}, 0}), std::invalid_argument);
  EXPECT_THROW(apply_noise(NoiseModel{Awgn{-1.0}, 0}, constant_sequence(2, 4, 1.0)), std::invalid_argument);
}

TEST(ParseNoise, MiniLanguage) {
  EXPECT_EQ(std::get<Awgn>(parse_noise("awgn:20")).sigma, 20.0);
  EXPECT_EQ(std::get<MultiplicativeGaussian>(parse_noise("mg:0.3")).sigma, 0.3);
  EXPECT_EQ(std::get<CorrelatedGaussian>(parse_noise("CG:25")).sigma, 25.0);
  EXPECT_EQ(std::get<ImpulseRandom>(parse_noise("ir:0.1")).probability, 0.1);
  const auto j = std::get<JpegGaussian>(parse_noise("jpeg:25:60"));
  EXPECT_EQ(j.sigma, 25.0);
  EXPECT_EQ(j.quality, 60);
  EXPECT_EQ(describe(parse_noise("jpeg:25:60")), "jpeg:25:60");
  EXPECT_THROW(parse_noise("speckle:1"), std::invalid_argument);
  EXPECT_THROW(parse_noise("awgn:x"), std::invalid_argument);
  EXPECT_THROW(parse_noise("awgn:-2"), std::invalid_argument);
  EXPECT_THROW(parse_noise("jpeg:25:60.5"), std::invalid_argument);
  EXPECT_THROW(parse_noise("awgn:1:2:3"), std::invalid_argument);
}

TEST(Jpeg, QuantTableScaling) {
  EXPECT_EQ(jpeg_quant_table(50), kJpegLuminanceTable);
  for (int q : jpeg_quant_table(100)) EXPECT_EQ(q, 1);
  // quality 75 -> scale 50: (16*50 + 50) / 100 = 8
  EXPECT_EQ(jpeg_quant_table(75)[0], 8);
  // quality 10 -> scale 500: 16 * 5 = 80
  EXPECT_EQ(jpeg_quant_table(10)[0], 80);
  EXPECT_EQ(jpeg_quant_table(1)[63], 255);
  EXPECT_THROW(jpeg_quant_table(0), std::invalid_argument);
}

TEST(Jpeg, ConstantBlocksSurviveAtQualityHundred) {
  Frame f(1, 16, 16);
  for (Eigen::Index r = 0; r < 16; ++r)
    for (Eigen::Index c = 0; c < 16; ++c) f.planes[0](r, c) = 30.0 + 50.0 * static_cast<double>((r / 8) * 2 + c / 8);
  EXPECT_TRUE((jpeg_degrade(f, 100).planes[0] == f.planes[0]).all());
}

TEST(Jpeg, MidGreyIsFixed) {
  const Frame f = constant_frame(24, 16, 128.0);
  for (int q : {1, 30, 60, 100}) EXPECT_TRUE((jpeg_degrade(f, q).planes[0] == 128.0).all()) << q;
}

TEST(Jpeg, SubThresholdCoefficientIsRemoved) {
  // DC 32 is exactly two quantiser steps at quality 50; the (0,1) coefficient
  // is 5 against a step of 11 and rounds to zero.
  Eigen::Matrix<double, 8, 8> coef = Eigen::Matrix<double, 8, 8>::Zero();
  coef(0, 0) = 32.0;
  coef(0, 1) = 5.0;
  Eigen::Matrix<double, 8, 8> basis;
  for (int k = 0; k < 8; ++k)
    for (int n = 0; n < 8; ++n)
      basis(k, n) = (k == 0 ? std::sqrt(0.125) : 0.5) * std::cos(std::numbers::pi * (2 * n + 1) * k / 16.0);
  const Eigen::Matrix<double, 8, 8> block = basis.transpose() * coef * basis;
  Frame f(1, 8, 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) f.planes[0](r, c) = block(r, c) + 128.0;
  EXPECT_GT(f.planes[0].maxCoeff() - f.planes[0].minCoeff(), 1.0);
  // DC-only reconstruction: 128 + 32 / 8.
  EXPECT_TRUE((jpeg_degrade(f, 50).planes[0] == 132.0).all());
}

TEST(Jpeg, NonMultipleOfEightKeepsShape) {
  const Frame f = random_frame(3, 13, 21, 60, true);
  const Frame g = jpeg_degrade(f, 60);
  EXPECT_TRUE(g.same_shape(f));
  EXPECT_TRUE(integer_in_range(FrameSequence{{g}, {}}));
}

TEST(CounterRng, UniformRangeAndNormalMoments) {
  const CounterRng rng(123);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform(0, 0, static_cast<std::uint64_t>(i), 5);
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
    const double z = rng.normal(1, 2, static_cast<std::uint64_t>(i));
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}
