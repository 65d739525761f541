#include "blindloom/fixtures.hpp"
#include "blindloom/flow.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace blindloom;
using blindloom::testing::random_image;

namespace {

Frame texture_frame(const Texture& t, Eigen::Index size, double dx = 0.0, double dy = 0.0) {
  return Frame({t.render(size, size, dx, dy)});
}

double median_magnitude(const FlowField& f) {
  return median_endpoint_error(f, FlowField(f.rows(), f.cols()));
}

FlowField constant_flow(Eigen::Index rows, Eigen::Index cols, double u, double v) {
  return FlowField(Image::Constant(rows, cols, u), Image::Constant(rows, cols, v));
}

Image ramp(Eigen::Index rows, Eigen::Index cols) {
  Image img(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) img(r, c) = static_cast<double>(c);
  return img;
}

}  // namespace

TEST(EstimateFlow, IdenticalFramesGiveNearZeroFlow) {
  const Texture tex(64, 1);
  const Frame a = texture_frame(tex, 64);
  EXPECT_LE(median_magnitude(estimate_flow(a, a)), 0.05);
}

TEST(EstimateFlow, RecoversCircularShift) {
  // The texture has period 64, so a 2 px shift of a 64x64 render is circular.
  for (std::uint64_t seed : {2u, 3u, 4u}) {
    const Texture tex(64, seed);
    const FlowField f = estimate_flow(texture_frame(tex, 64), texture_frame(tex, 64, 2.0, 0.0));
    EXPECT_LE(median_endpoint_error(f, constant_flow(64, 64, 2.0, 0.0), 8), 0.2) << seed;
  }
}

TEST(EstimateFlow, RecoversVerticalShift) {
  const Texture tex(64, 5);
  const FlowField f = estimate_flow(texture_frame(tex, 64), texture_frame(tex, 64, 0.0, -1.5));
  EXPECT_LE(median_endpoint_error(f, constant_flow(64, 64, 0.0, -1.5), 8), 0.2);
}

TEST(EstimateFlow, HomogeneousFramesGiveZeroFlow) {
  const Frame a(1, 32, 32, 90.0);
  const Frame b(1, 32, 32, 140.0);
  const FlowField f = estimate_flow(a, b);
  EXPECT_EQ(f.u.abs().maxCoeff(), 0.0);
  EXPECT_EQ(f.v.abs().maxCoeff(), 0.0);
}

TEST(EstimateFlow, TranslationEquivariant) {
  // Shifting both inputs by k pixels shifts the flow field by k pixels.
  const Texture tex(64, 7);
  const Frame a = texture_frame(tex, 64);
  const Frame b = texture_frame(tex, 64, 1.0, 0.5);
  const Eigen::Index k = 4;
  const Frame ak = texture_frame(tex, 64, static_cast<double>(k), 0.0);
  const Frame bk = texture_frame(tex, 64, 1.0 + static_cast<double>(k), 0.5);
  const FlowField f = estimate_flow(a, b);
  const FlowField fk = estimate_flow(ak, bk);
  FlowField shifted(64, 64);
  shifted.u.rightCols(64 - k) = f.u.leftCols(64 - k);
  shifted.v.rightCols(64 - k) = f.v.leftCols(64 - k);
  shifted.u.leftCols(k) = fk.u.leftCols(k);
  shifted.v.leftCols(k) = fk.v.leftCols(k);
  EXPECT_LE(median_endpoint_error(fk, shifted, 8), 0.2);
}

TEST(EstimateFlow, Deterministic) {
  const Texture tex(32, 8);
  const Frame a = texture_frame(tex, 32);
  const Frame b = texture_frame(tex, 32, 1.0, 1.0);
  const FlowField f1 = estimate_flow(a, b);
  const FlowField f2 = estimate_flow(a, b);
  EXPECT_TRUE((f1.u == f2.u).all() && (f1.v == f2.v).all());
}

TEST(EstimateFlow, BoundedAndFinite) {
  const Frame a({random_image(32, 32, 1)});
  const Frame b({random_image(32, 32, 2)});
  const FlowField f = estimate_flow(a, b);
  EXPECT_TRUE(f.u.isFinite().all() && f.v.isFinite().all());
  EXPECT_LE(f.u.abs().maxCoeff(), 32.0);
  EXPECT_LE(f.v.abs().maxCoeff(), 32.0);
}

TEST(EstimateFlow, TooSmallForPyramidRejected) {
  const Frame a(1, 12, 12, 1.0);
  FlowSettings s;
  s.levels = 3;
  EXPECT_THROW(estimate_flow(a, a, s), std::invalid_argument);
  s.levels = 1;
  EXPECT_NO_THROW(estimate_flow(a, a, s));
  EXPECT_THROW(estimate_flow(a, Frame(1, 12, 13, 1.0), s), std::invalid_argument);
}

TEST(FlowPair, IdentitySourceOnIdenticalFrames) {
  const Texture tex(64, 9);
  const Frame a = texture_frame(tex, 64);
  const FrameSource same = [&](std::size_t) { return a; };
  const FlowPair p = flow_pair(same, 1);
  EXPECT_LE(median_magnitude(p.forward), 0.05);
  EXPECT_LE(median_magnitude(p.backward), 0.05);
  EXPECT_EQ(p.forward.direction, FlowDirection::kForward);
  EXPECT_EQ(p.backward.direction, FlowDirection::kBackward);
}

TEST(FlowPair, RawSourceMatchesEstimateFlow) {
  const Texture tex(64, 10);
  const std::vector<Frame> frames = {texture_frame(tex, 64), texture_frame(tex, 64, 1.0, 0.0),
                                     texture_frame(tex, 64, 2.0, 0.0)};
  const FrameSource raw = [&](std::size_t i) { return frames[i]; };
  const FlowPair p = flow_pair(raw, 2);
  const FlowField f = estimate_flow(frames[1], frames[2]);
  const FlowField b = estimate_flow(frames[2], frames[1]);
  EXPECT_TRUE((p.forward.u == f.u).all() && (p.forward.v == f.v).all());
  EXPECT_TRUE((p.backward.u == b.u).all() && (p.backward.v == b.v).all());
  EXPECT_THROW(flow_pair(raw, 0), std::out_of_range);
}

TEST(FlowPair, ForwardAndBackwardAreOpposite) {
  const Texture tex(64, 11);
  const std::vector<Frame> frames = {texture_frame(tex, 64), texture_frame(tex, 64, 1.0, 1.0)};
  const FlowPair p = flow_pair([&](std::size_t i) { return frames[i]; }, 1);
  EXPECT_LE(median_endpoint_error(p.forward, constant_flow(64, 64, 1.0, 1.0), 8), 0.2);
  EXPECT_LE(median_endpoint_error(p.backward, constant_flow(64, 64, -1.0, -1.0), 8), 0.2);
}

TEST(WarpInverse, ZeroFlowIsExactIdentity) {
  const Image b = random_image(9, 11, 12);
  Image oor;
  const Image w = warp_inverse(b, FlowField(9, 11), &oor);
  EXPECT_TRUE((w == b).all());
  EXPECT_EQ(oor.sum(), 0.0);
}

TEST(WarpInverse, IntegerFlowIsGather) {
  const Image b = random_image(9, 11, 13);
  const FlowField f = constant_flow(9, 11, 1.0, 0.0);
  Image oor;
  const Image w = warp_inverse(b, f, &oor);
  for (Eigen::Index r = 0; r < 9; ++r)
    for (Eigen::Index c = 0; c < 10; ++c) EXPECT_EQ(w(r, c), b(r, c + 1));
  EXPECT_EQ(oor.col(10).sum(), 9.0);
  EXPECT_EQ(oor.leftCols(10).sum(), 0.0);
  // The last column samples past the edge and takes the clamped value.
  EXPECT_EQ(w(4, 10), b(4, 10));
}

TEST(WarpInverse, RandomIntegerFlowIsGather) {
  const Image b = random_image(12, 12, 14);
  FlowField f(12, 12);
  std::mt19937_64 rng(15);
  for (Eigen::Index r = 0; r < 12; ++r)
    for (Eigen::Index c = 0; c < 12; ++c) {
      f.u(r, c) = static_cast<double>(std::uniform_int_distribution<Eigen::Index>(-c, 11 - c)(rng));
      f.v(r, c) = static_cast<double>(std::uniform_int_distribution<Eigen::Index>(-r, 11 - r)(rng));
    }
  Image oor;
  const Image w = warp_inverse(b, f, &oor);
  for (Eigen::Index r = 0; r < 12; ++r)
    for (Eigen::Index c = 0; c < 12; ++c)
      EXPECT_EQ(w(r, c), b(r + static_cast<Eigen::Index>(f.v(r, c)), c + static_cast<Eigen::Index>(f.u(r, c))));
  EXPECT_EQ(oor.sum(), 0.0);
}

TEST(WarpInverse, HalfPixelOnRamp) {
  const Image b = ramp(5, 8);
  const Image w = warp_inverse(b, constant_flow(5, 8, 0.5, 0.0));
  for (Eigen::Index r = 0; r < 5; ++r)
    for (Eigen::Index c = 0; c < 7; ++c) EXPECT_NEAR(w(r, c), static_cast<double>(c) + 0.5, 1e-12);
}

TEST(WarpInverse, FrameWarpsEveryChannel) {
  const Frame f({random_image(6, 6, 16), random_image(6, 6, 17)});
  const FlowField flow = constant_flow(6, 6, 0.0, 1.0);
  const Frame w = warp_inverse(f, flow);
  for (std::size_t c = 0; c < 2; ++c) EXPECT_TRUE((w.planes[c] == warp_inverse(f.planes[c], flow)).all());
}

TEST(SampleBilinear, FlagsOutside) {
  const Image img = ramp(4, 4);
  bool outside = false;
  EXPECT_EQ(sample_bilinear(img, 3.0, 3.0, &outside), 3.0);
  EXPECT_FALSE(outside);
  // The image covers the pixel footprint [-0.5, cols - 0.5].
  EXPECT_EQ(sample_bilinear(img, 3.5, 1.0, &outside), 3.0);
  EXPECT_FALSE(outside);
  EXPECT_EQ(sample_bilinear(img, -0.4, 1.0, &outside), 0.0);
  EXPECT_FALSE(outside);
  EXPECT_EQ(sample_bilinear(img, 3.6, 1.0, &outside), 3.0);
  EXPECT_TRUE(outside);
  EXPECT_EQ(sample_bilinear(img, 1.0, -0.6, &outside), 1.0);
  EXPECT_TRUE(outside);
}

TEST(HybridLoss, LambdaZeroIsEndpointError) {
  const Frame a({random_image(8, 8, 20)});
  const Frame b({random_image(8, 8, 21)});
  const FlowField est(random_image(8, 8, 22, -1, 1), random_image(8, 8, 23, -1, 1));
  const FlowGroundTruth gt{FlowField(8, 8), Image::Zero(8, 8)};
  double epe = 0.0;
  for (Eigen::Index i = 0; i < 64; ++i) epe += std::hypot(est.u.data()[i], est.v.data()[i]);
  EXPECT_NEAR(hybrid_flow_loss(est, gt, a, b, 0.0), epe / 64.0, 1e-12);
}

TEST(HybridLoss, PerfectAlignmentHasZeroWarpTerm) {
  const Texture tex(32, 24);
  const Frame b = texture_frame(tex, 32);
  const FlowField gt_flow = constant_flow(32, 32, 1.0, 0.0);
  const Frame a({warp_inverse(b.planes[0], gt_flow)});
  const FlowGroundTruth gt{gt_flow, Image::Zero(32, 32)};
  EXPECT_EQ(hybrid_flow_loss(gt_flow, gt, a, b, 0.06), 0.0);
}

TEST(HybridLoss, HandEvaluatedTwoByTwo) {
  const Frame a(1, 2, 2, 255.0);
  const Frame b(1, 2, 2, 127.5);
  const FlowGroundTruth gt{FlowField(2, 2), Image::Zero(2, 2)};
  EXPECT_NEAR(hybrid_flow_loss(gt.flow, gt, a, b, 0.06), 0.015, 0.015 * 1e-5);
}

TEST(HybridLoss, OcclusionMasksWarpTerm) {
  const Frame a(1, 2, 2, 255.0);
  const Frame b(1, 2, 2, 127.5);
  const FlowGroundTruth gt{FlowField(2, 2), Image::Ones(2, 2)};
  EXPECT_EQ(hybrid_flow_loss(gt.flow, gt, a, b, 0.06), 0.0);
}

TEST(HybridLoss, NonNegativeAndMonotoneInLambda) {
  const Frame a({random_image(10, 10, 25)});
  const Frame b({random_image(10, 10, 26)});
  const FlowField est(random_image(10, 10, 27, -2, 2), random_image(10, 10, 28, -2, 2));
  const FlowGroundTruth gt{FlowField(random_image(10, 10, 29, -2, 2), random_image(10, 10, 30, -2, 2)),
                           (random_image(10, 10, 31, 0, 1) > 0.7).cast<double>()};
  double last = -1.0;
  for (double lambda : {0.0, 0.01, 0.06, 0.5, 3.0}) {
    const double l = hybrid_flow_loss(est, gt, a, b, lambda);
    EXPECT_GE(l, 0.0);
    EXPECT_GT(l, last);
    last = l;
  }
}

TEST(HybridLoss, ShapeMismatchRejected) {
  const FlowGroundTruth gt{FlowField(4, 4), Image::Zero(4, 4)};
  EXPECT_THROW(hybrid_flow_loss(FlowField(4, 5), gt, Frame(1, 4, 4), Frame(1, 4, 4), 0.06), std::invalid_argument);
  EXPECT_THROW(hybrid_flow_loss(FlowField(4, 4), gt, Frame(1, 4, 4), Frame(1, 4, 5), 0.06), std::invalid_argument);
}

TEST(RefineFlow, AlreadyOptimalStaysZero) {
  const Texture tex(32, 32);
  const Frame a = texture_frame(tex, 32);
  const FlowField out = refine_flow(FlowField(32, 32), a, a, Image::Zero(32, 32));
  EXPECT_EQ(out.u.abs().maxCoeff(), 0.0);
  EXPECT_EQ(out.v.abs().maxCoeff(), 0.0);
}

TEST(RefineFlow, ZeroStepsIsIdentity) {
  const FlowField init(random_image(16, 16, 33, -1, 1), random_image(16, 16, 34, -1, 1));
  RefineSettings s;
  s.steps = 0;
  const FlowField out = refine_flow(init, Frame({random_image(16, 16, 35)}), Frame({random_image(16, 16, 36)}),
                                    Image::Zero(16, 16), s);
  EXPECT_TRUE((out.u == init.u).all() && (out.v == init.v).all());
  s.steps = -1;
  EXPECT_THROW(refine_flow(init, Frame(1, 16, 16), Frame(1, 16, 16), Image::Zero(16, 16), s), std::invalid_argument);
}

TEST(RefineFlow, ReducesEndpointErrorOfOffsetInit) {
  const Texture tex(64, 37);
  const Frame a = texture_frame(tex, 64);
  const Frame b = texture_frame(tex, 64, 2.0, 0.0);
  const FlowField truth = constant_flow(64, 64, 2.0, 0.0);
  const FlowField init = constant_flow(64, 64, 2.3, 0.0);
  const FlowField out = refine_flow(init, a, b, Image::Zero(64, 64));
  EXPECT_LT(endpoint_error(out, truth), endpoint_error(init, truth));
}

TEST(RefineFlow, NeverIncreasesObjective) {
  const Frame a({random_image(24, 24, 38)});
  const Frame b({random_image(24, 24, 39)});
  const FlowField init(random_image(24, 24, 40, -1, 1), random_image(24, 24, 41, -1, 1));
  const Image occ = Image::Zero(24, 24);
  RefineSettings s;
  const Image ga = a.planes[0] / 255.0;
  const Image gb = b.planes[0] / 255.0;
  const double before = refine_objective(init, init, ga, gb, occ, s);
  const FlowField out = refine_flow(init, a, b, occ, s);
  EXPECT_LE(refine_objective(out, init, ga, gb, occ, s), before);
}

TEST(EndpointError, MeanAndMedian) {
  const FlowField a = constant_flow(3, 3, 3.0, 4.0);
  const FlowField z(3, 3);
  EXPECT_DOUBLE_EQ(endpoint_error(a, z), 5.0);
  EXPECT_DOUBLE_EQ(median_endpoint_error(a, z), 5.0);
  EXPECT_DOUBLE_EQ(median_endpoint_error(a, z, 1), 5.0);
}
