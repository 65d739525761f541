#include "blindloom/dae.hpp"
#include "blindloom/fixtures.hpp"
#include "blindloom/noise.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace blindloom;
using blindloom::testing::random_frame;
using blindloom::testing::scratch_dir;

namespace {

DaeTrainConfig small_config(std::uint64_t seed) {
  DaeTrainConfig cfg;
  cfg.steps = 150;
  cfg.crop = 32;
  cfg.seed = seed;
  return cfg;
}

const DaeModel& trained() {
  static const DaeModel model = train_dae(make_corpus(8, 64, 5), small_config(5));
  return model;
}

bool same_params(const ParamSet<float>& a, const ParamSet<float>& b) {
  for (const auto& [name, p] : a.entries)
    if (p.value.data() != b[name].data()) return false;
  return true;
}

FrameSequence fixture_sequence(FixtureKind kind, std::uint64_t seed, std::size_t frames = 4) {
  FixtureSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  spec.frames = frames;
  return make_fixture(spec).clean;
}

double max_abs_diff(const Frame& a, const Frame& b) {
  double m = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) m = std::max(m, (a.planes[c] - b.planes[c]).abs().maxCoeff());
  return m;
}

}  // namespace

TEST(DaeModel, FreshModelReconstructsExactly) {
  const DaeModel dae = DaeModel::create(1, 3);
  const Frame f = random_frame(1, 24, 24, 4, true);
  EXPECT_LE(max_abs_diff(reconstruct(dae, f), f), 1e-9);
  FrameSequence seq;
  seq.frames = {f, random_frame(1, 24, 24, 5, true)};
  EXPECT_DOUBLE_EQ(reconstruction_error(dae, seq), 0.0);
}

TEST(DaeModel, FromParamsRecoversSpec) {
  const DaeModel dae = DaeModel::create(3, 1, 8, 3);
  const DaeModel back = DaeModel::from_params(dae.params);
  EXPECT_EQ(back.spec.in_channels, 3u);
  EXPECT_EQ(back.spec.out_channels, 3u);
  EXPECT_EQ(back.spec.hidden_channels, 8u);
  EXPECT_EQ(back.spec.layers, 3u);
}

TEST(DaeModel, SaveLoadRoundTrip) {
  const auto dir = scratch_dir("dae_roundtrip");
  save_dae(dir / "dae.bin", trained());
  const DaeModel back = load_dae(dir / "dae.bin");
  EXPECT_TRUE(same_params(back.params, trained().params));
  const Frame f = random_frame(1, 32, 32, 9, true);
  EXPECT_EQ(max_abs_diff(reconstruct(back, f), reconstruct(trained(), f)), 0.0);
}

TEST(DaeTraining, ZeroStepsLeavesModelUnchanged) {
  const DaeModel start = DaeModel::create(1, 2);
  DaeTrainConfig cfg = small_config(2);
  cfg.steps = 0;
  EXPECT_TRUE(same_params(train_dae(start, make_corpus(2, 32, 1), cfg).params, start.params));
}

TEST(DaeTraining, EmptyCorpusThrows) {
  EXPECT_THROW(train_dae(std::vector<Frame>{}, small_config(0)), std::invalid_argument);
}

TEST(DaeTraining, Deterministic) {
  DaeTrainConfig cfg = small_config(3);
  cfg.steps = 10;
  const auto corpus = make_corpus(2, 32, 3);
  EXPECT_TRUE(same_params(train_dae(corpus, cfg).params, train_dae(corpus, cfg).params));
}

TEST(DaeTraining, CleanInputReconstructsBetterThanNoisy) {
  for (std::uint64_t seed : {21u, 22u}) {
    const FrameSequence clean = fixture_sequence(FixtureKind::kStaticTexture, seed);
    const FrameSequence noisy = apply_noise(NoiseModel{Awgn{20.0}, seed}, clean);
    const double e_clean = reconstruction_error(trained(), clean);
    const double e_noisy = reconstruction_error(trained(), noisy);
    EXPECT_GE(e_clean, 0.0);
    EXPECT_LT(e_clean, e_noisy) << "seed " << seed;
  }
}

TEST(DaeTraining, ErrorUnchangedByDuplicatingFrames) {
  const FrameSequence seq = fixture_sequence(FixtureKind::kTranslatingTexture, 4, 3);
  FrameSequence doubled;
  for (const auto& f : seq.frames) {
    doubled.frames.push_back(f);
    doubled.frames.push_back(f);
  }
  EXPECT_NEAR(reconstruction_error(trained(), doubled), reconstruction_error(trained(), seq), 1e-9);
}

TEST(DaeSelection, DecisionRule) {
  EXPECT_EQ(decide(1.0, 0.4), ModelChoice::kFinetuned);
  EXPECT_EQ(decide(1.0, 0.6), ModelChoice::kInitial);
  EXPECT_EQ(decide(1.0, 0.5), ModelChoice::kInitial);
  EXPECT_EQ(decide(1.0, 0.0), ModelChoice::kFinetuned);
  EXPECT_EQ(decide(0.0, 0.0), ModelChoice::kInitial);
}

TEST(DaeSelection, DecisionIsScaleInvariant) {
  for (double e1 : {0.1, 0.3, 0.49, 0.5, 0.51, 0.9, 1.5}) {
    for (double k : {1e-3, 0.7, 3.0, 250.0}) EXPECT_EQ(decide(k, k * e1), decide(1.0, e1)) << e1 << " " << k;
  }
}

TEST(DaeSelection, ReportFillsErrorsAndChoice) {
  const FrameSequence clean = fixture_sequence(FixtureKind::kStaticTexture, 30);
  const FrameSequence noisy = apply_noise(NoiseModel{Awgn{20.0}, 30}, clean);
  const SelectionReport r = select_model(trained(), noisy, clean);
  EXPECT_DOUBLE_EQ(r.error_before, reconstruction_error(trained(), noisy));
  EXPECT_DOUBLE_EQ(r.error_after, reconstruction_error(trained(), clean));
  EXPECT_EQ(r.choice, decide(r.error_before, r.error_after));
}

TEST(DaeSelection, LengthMismatchThrows) {
  const FrameSequence a = fixture_sequence(FixtureKind::kStaticTexture, 1, 3);
  const FrameSequence b = fixture_sequence(FixtureKind::kStaticTexture, 1, 4);
  EXPECT_THROW(select_model(trained(), a, b), std::invalid_argument);
}

TEST(DaeSelection, ChoiceNames) {
  EXPECT_EQ(to_string(ModelChoice::kInitial), "initial");
  EXPECT_EQ(to_string(ModelChoice::kFinetuned), "finetuned");
}
