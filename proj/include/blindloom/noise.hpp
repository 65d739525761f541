#pragma once

#include "blindloom/image.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <variant>

namespace blindloom {

// Counter-based generator: every draw is a pure function of
// (seed, frame, channel, pixel, stream), so noise fields are reproducible
// and independent of evaluation order. Uniforms come from a SplitMix64
// finaliser over the mixed counter; Gaussians use Box-Muller (cosine branch)
// on streams 2k and 2k+1.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t frame, std::uint64_t channel, std::uint64_t pixel, std::uint64_t stream) const;
  // Uniform in (0, 1].
  double uniform(std::uint64_t frame, std::uint64_t channel, std::uint64_t pixel, std::uint64_t stream) const;
  double normal(std::uint64_t frame, std::uint64_t channel, std::uint64_t pixel, std::uint64_t stream = 0) const;

 private:
  std::uint64_t seed_;
};

struct Awgn {
  double sigma = 20.0;
};
struct MultiplicativeGaussian {
  double sigma = 0.3;
};
// AWGN field blurred by a 3x3 box filter, then added.
struct CorrelatedGaussian {
  double sigma = 25.0;
};
struct ImpulseRandom {
  double probability = 0.1;
  double low = 0.0;
  double high = 255.0;
};
struct JpegGaussian {
  double sigma = 25.0;
  int quality = 60;
};

using NoiseVariant = std::variant<Awgn, MultiplicativeGaussian, CorrelatedGaussian, ImpulseRandom, JpegGaussian>;

struct NoiseModel {
  NoiseVariant variant = Awgn{};
  std::uint64_t seed = 0;
};

void validate(const NoiseModel& model);

// Parses the `name:param[:param]` mini-language: awgn:20, mg:0.3, cg:25,
// ir:0.1, jpeg:25:60.
NoiseVariant parse_noise(const std::string& text);
std::string describe(const NoiseVariant& v);

// Every output pixel is clipped to [0, 255] and then rounded to an integer.
FrameSequence apply_noise(const NoiseModel& model, const FrameSequence& clean);
Frame apply_noise(const NoiseModel& model, const Frame& clean, std::uint64_t frame_index);

// Standard JPEG luminance quantisation table (row-major 8x8).
extern const std::array<int, 64> kJpegLuminanceTable;
// libjpeg-convention scaling of the base table for quality in [1, 100].
std::array<int, 64> jpeg_quant_table(int quality);

// Per channel: level shift, 8x8 block DCT-II, quantise/dequantise, inverse
// DCT, clip to [0, 255] and round. Frames whose sides are not multiples of 8
// are edge-padded for the transform and cropped back.
Frame jpeg_degrade(const Frame& frame, int quality);

}  // namespace blindloom
