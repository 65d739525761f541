#pragma once

#include "blindloom/correspondence.hpp"
#include "blindloom/flow.hpp"
#include "blindloom/frame_io.hpp"
#include "blindloom/image.hpp"

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace blindloom {

enum class OcclusionMode { kConsistency, kDivergence, kNone };
enum class SamplerMode { kTwin, kNaive };

struct SamplerConfig {
  std::size_t window = 5;
  std::size_t batch_size = 32;
  Eigen::Index crop = 96;
  OcclusionMode occlusion = OcclusionMode::kConsistency;
  bool lighting = true;
  bool online_denoise = true;
  SamplerMode sampler = SamplerMode::kTwin;
  bool refine_flow = false;
  FlowSettings flow;
  RefineSettings refine;
  CorrespondenceParams correspondence;
  // Crops whose weight is zero on more than this fraction are redrawn.
  double max_masked_fraction = 0.95;
  int crop_retries = 8;
};

// One training sample. Slot k of the stack holds frame (center + k - window/2)
// or its substitute; provenance[k] is the source frame its pixels come from.
struct TwinPair {
  std::vector<Frame> input_stack;
  std::vector<std::size_t> provenance;
  Frame target;
  std::size_t target_source = 0;
  Image weight;
  std::size_t center = 0;

  std::set<std::size_t> input_sources() const { return {provenance.begin(), provenance.end()}; }
  // Source frames present in both the input and the target.
  std::set<std::size_t> provenance_overlap() const;
};

struct MiniBatch {
  std::vector<TwinPair> pairs;
  Eigen::Index crop_rows = 0;
  Eigen::Index crop_cols = 0;
};

// Frame indices filling a window around `center`; out-of-range slots repeat
// the nearest in-range slot.
std::vector<std::size_t> window_indices(std::size_t sequence_length, std::size_t center, std::size_t window);

// Everything derived from one forward/backward flow computation between
// frames i-1 and i.
struct PairCorrespondence {
  std::size_t index = 0;  // i
  FlowPair flows;
  OcclusionMask occlusion_current;   // o_i
  OcclusionMask occlusion_previous;  // o_{i-1}
  LightingMap lighting_current;      // l_i
  LightingMap lighting_previous;     // l_{i-1}
  WeightMap weight_current;          // gamma for the pair centred on i
  WeightMap weight_previous;         // gamma for the pair centred on i-1
};

// Flows, occlusion, lighting and loss weights for frames (i-1, i).
// `estimates` yields the frames flows and lighting are computed on
// (denoised frames for online denoising, raw frames otherwise).
PairCorrespondence analyze_pair(const FrameSource& estimates, std::size_t i, const SamplerConfig& config);

struct TwinPairs {
  TwinPair previous;  // centred on i-1, target y_{i->(i-1)}
  TwinPair current;   // centred on i,   target y_{(i-1)->i}
};

// Builds both twins from a single (w^f, w^b) pair without further flow
// estimation. Weights are the gammas of the respective centre frames.
TwinPairs build_twin_pairs(const FrameSequence& seq, std::size_t i, const FlowPair& flows,
                           const WeightMap& weight_previous, const WeightMap& weight_current, std::size_t window);
TwinPairs build_twin_pairs(const FrameSequence& seq, const PairCorrespondence& corr, std::size_t window);

// Baseline: unmodified stack Y_i with target y_{(i-1)->i}.
TwinPair build_naive_pair(const FrameSequence& seq, std::size_t i, const FlowField& backward,
                          const WeightMap& weight_current, std::size_t window);

TwinPair crop(const TwinPair& pair, const CropWindow& window);

// Draws a crop window uniformly among all positions inside the frame.
CropWindow random_crop(Eigen::Index rows, Eigen::Index cols, Eigen::Index crop_rows, Eigen::Index crop_cols,
                       std::mt19937_64& rng);

// Fills a mini-batch: draw i uniformly in [1, n-1], analyse (i-1, i), build
// the twins (or one naive pair) and crop each with its own window. The crop
// size is limited to the frame size.
MiniBatch assemble_batch(const FrameSequence& seq, const FrameSource& estimates, const SamplerConfig& config,
                         std::mt19937_64& rng);

std::string to_string(OcclusionMode m);
std::string to_string(SamplerMode m);
OcclusionMode parse_occlusion_mode(const std::string& s);
SamplerMode parse_sampler_mode(const std::string& s);

}  // namespace blindloom
