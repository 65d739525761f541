#pragma once

#include "blindloom/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace blindloom {

enum class FixtureKind { kStaticTexture, kTranslatingTexture, kOccluderSquare, kLightingRamp };

struct FixtureSpec {
  FixtureKind kind = FixtureKind::kStaticTexture;
  Eigen::Index size = 64;
  std::size_t frames = 10;
  std::uint64_t seed = 0;
  std::size_t channels = 1;
  double shift_x = 2.0;  // translating-texture, pixels per frame
  double shift_y = 0.0;
  Eigen::Index square = 16;  // occluder-square side
  Eigen::Index speed = 6;    // occluder-square, pixels per frame
  double gain_start = 0.8;   // lighting-ramp
  double gain_end = 1.2;
};

// Clean sequence plus ground truth for every consecutive pair (i-1, i),
// stored at index i-1.
struct Fixture {
  FrameSequence clean;
  std::vector<FlowField> forward;             // w^f: frame i-1 -> frame i
  std::vector<FlowField> backward;            // w^b: frame i -> frame i-1
  std::vector<Image> occlusion_current;       // pixels of frame i absent from frame i-1
  std::vector<Image> occlusion_previous;      // pixels of frame i-1 absent from frame i
  std::vector<Eigen::Index> square_left;      // occluder-square column per frame
  std::vector<double> gain;                   // per-frame intensity gain
};

// Smooth periodic texture (a sum of sinusoids with period `size`), evaluated
// at continuous coordinates so shifted copies are exact.
class Texture {
 public:
  Texture(Eigen::Index period, std::uint64_t seed, double mean = 128.0, double amplitude = 80.0);
  double operator()(double x, double y) const;
  Image render(Eigen::Index rows, Eigen::Index cols, double dx = 0.0, double dy = 0.0) const;

 private:
  struct Wave {
    double fx, fy, phase, amplitude;
  };
  double mean_;
  std::vector<Wave> waves_;
};

Fixture make_fixture(const FixtureSpec& spec);

FixtureKind parse_fixture_kind(const std::string& s);
std::string to_string(FixtureKind k);

// Still images for pretraining, drawn from textures disjoint from fixture seeds.
std::vector<Frame> make_corpus(std::size_t count, Eigen::Index size, std::uint64_t seed, std::size_t channels = 1);

}  // namespace blindloom
