#include "blindloom/twin_sampler.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <stdexcept>

namespace blindloom {

std::set<std::size_t> TwinPair::provenance_overlap() const {
  std::set<std::size_t> out;
  for (std::size_t p : provenance) {
    if (p == target_source) out.insert(p);
  }
  return out;
}

namespace {

struct Slot {
  bool in_range = false;
  std::size_t frame = 0;
};

// Slots of a window around `center` before edge replication.
std::vector<Slot> window_slots(std::size_t sequence_length, std::size_t center, std::size_t window) {
  if (window == 0 || window % 2 == 0) throw std::invalid_argument("temporal window must be odd");
  if (center >= sequence_length) throw std::out_of_range("window centre outside sequence");
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  std::vector<Slot> slots(window);
  for (std::size_t k = 0; k < window; ++k) {
    const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(center) + static_cast<std::ptrdiff_t>(k) - half;
    if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(sequence_length)) {
      slots[k] = {true, static_cast<std::size_t>(idx)};
    }
  }
  return slots;
}

// Source slot for every slot: itself when in range, else the nearest in-range slot.
std::vector<std::size_t> replicate_map(const std::vector<Slot>& slots) {
  std::size_t first = slots.size();
  std::size_t last = 0;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (slots[k].in_range) {
      first = std::min(first, k);
      last = k;
    }
  }
  std::vector<std::size_t> map(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) map[k] = k < first ? first : (k > last ? last : k);
  return map;
}

// Stack centred on `center` with the slot holding frame `replaced` swapped
// for `substitute` (whose pixels come from `substitute_source`).
void fill_stack(TwinPair& pair, const FrameSequence& seq, std::size_t center, std::size_t window,
                std::optional<std::size_t> replaced, const Frame* substitute, std::size_t substitute_source) {
  const auto slots = window_slots(seq.size(), center, window);
  const auto map = replicate_map(slots);
  pair.center = center;
  pair.input_stack.clear();
  pair.provenance.clear();
  for (std::size_t k = 0; k < window; ++k) {
    const Slot& s = slots[map[k]];
    if (replaced && s.frame == *replaced) {
      pair.input_stack.push_back(*substitute);
      pair.provenance.push_back(substitute_source);
    } else {
      pair.input_stack.push_back(seq[s.frame]);
      pair.provenance.push_back(s.frame);
    }
  }
}

void check_index(const FrameSequence& seq, std::size_t i) {
  if (i == 0 || i >= seq.size()) {
    throw std::out_of_range("pair index " + std::to_string(i) + " outside [1, " + std::to_string(seq.size() - 1) + "]");
  }
}

OcclusionMask occlusion_for(const FlowField& toward, const FlowField& back, const SamplerConfig& cfg) {
  // `back` is defined on the frame whose mask is wanted; `toward` is the other direction.
  Image flags;
  const Image probe = Image::Zero(back.rows(), back.cols());
  warp_inverse(probe, back, &flags);
  switch (cfg.occlusion) {
    case OcclusionMode::kConsistency:
      return merge(occlusion_consistency(toward, back, cfg.correspondence), flags);
    case OcclusionMode::kDivergence:
      return merge(occlusion_divergence(back, cfg.correspondence.divergence_threshold), flags);
    case OcclusionMode::kNone:
      return OcclusionMask{Image::Zero(back.rows(), back.cols())};
  }
  throw std::logic_error("unhandled occlusion mode");
}

}  // namespace

std::vector<std::size_t> window_indices(std::size_t sequence_length, std::size_t center, std::size_t window) {
  const auto slots = window_slots(sequence_length, center, window);
  const auto map = replicate_map(slots);
  std::vector<std::size_t> out(window);
  for (std::size_t k = 0; k < window; ++k) out[k] = slots[map[k]].frame;
  return out;
}

PairCorrespondence analyze_pair(const FrameSource& estimates, std::size_t i, const SamplerConfig& cfg) {
  if (i == 0) throw std::out_of_range("analyze_pair: index must be >= 1");
  PairCorrespondence c;
  c.index = i;
  const Frame prev = estimates(i - 1);
  const Frame cur = estimates(i);
  c.flows.forward = estimate_flow(prev, cur, cfg.flow);
  c.flows.backward = estimate_flow(cur, prev, cfg.flow);
  c.flows.forward.direction = FlowDirection::kForward;
  c.flows.backward.direction = FlowDirection::kBackward;
  if (cfg.refine_flow) {
    // Refine each direction against the warping residual, masking pixels the
    // initial consistency check already marks occluded.
    const OcclusionMask o_cur = occlusion_consistency(c.flows.forward, c.flows.backward, cfg.correspondence);
    const OcclusionMask o_prev = occlusion_consistency(c.flows.backward, c.flows.forward, cfg.correspondence);
    FlowField f = refine_flow(c.flows.forward, prev, cur, o_prev.occluded, cfg.refine);
    FlowField b = refine_flow(c.flows.backward, cur, prev, o_cur.occluded, cfg.refine);
    c.flows.forward = std::move(f);
    c.flows.backward = std::move(b);
  }
  c.occlusion_current = occlusion_for(c.flows.forward, c.flows.backward, cfg);
  c.occlusion_previous = occlusion_for(c.flows.backward, c.flows.forward, cfg);
  if (cfg.lighting) {
    const CleanEstimates est_cur = clean_estimates(prev, cur, c.flows.backward);
    const CleanEstimates est_prev = clean_estimates(cur, prev, c.flows.forward);
    c.lighting_current = lighting_variation(est_cur.current, est_cur.aligned, c.occlusion_current, cfg.correspondence);
    c.lighting_previous =
        lighting_variation(est_prev.current, est_prev.aligned, c.occlusion_previous, cfg.correspondence);
  } else {
    c.lighting_current = LightingMap{Image::Zero(cur.rows(), cur.cols())};
    c.lighting_previous = c.lighting_current;
  }
  c.weight_current = weight_map(c.occlusion_current, c.lighting_current, cfg.correspondence.alpha3);
  c.weight_previous = weight_map(c.occlusion_previous, c.lighting_previous, cfg.correspondence.alpha3);
  return c;
}

TwinPairs build_twin_pairs(const FrameSequence& seq, std::size_t i, const FlowPair& flows,
                           const WeightMap& weight_previous, const WeightMap& weight_current, std::size_t window) {
  check_index(seq, i);
  const Frame prev_to_cur = warp_inverse(seq[i - 1], flows.backward);  // y_{(i-1)->i}
  const Frame cur_to_prev = warp_inverse(seq[i], flows.forward);       // y_{i->(i-1)}
  TwinPairs out;
  // Y'_{i-1}: y_i replaced by y_{(i-1)->i}; target y_{i->(i-1)}.
  fill_stack(out.previous, seq, i - 1, window, i, &prev_to_cur, i - 1);
  out.previous.target = cur_to_prev;
  out.previous.target_source = i;
  out.previous.weight = weight_previous.gamma;
  // Y'_i: y_{i-1} replaced by y_{i->(i-1)}; target y_{(i-1)->i}.
  fill_stack(out.current, seq, i, window, i - 1, &cur_to_prev, i);
  out.current.target = prev_to_cur;
  out.current.target_source = i - 1;
  out.current.weight = weight_current.gamma;
  return out;
}

TwinPairs build_twin_pairs(const FrameSequence& seq, const PairCorrespondence& corr, std::size_t window) {
  return build_twin_pairs(seq, corr.index, corr.flows, corr.weight_previous, corr.weight_current, window);
}

TwinPair build_naive_pair(const FrameSequence& seq, std::size_t i, const FlowField& backward,
                          const WeightMap& weight_current, std::size_t window) {
  check_index(seq, i);
  TwinPair pair;
  fill_stack(pair, seq, i, window, std::nullopt, nullptr, 0);
  pair.target = warp_inverse(seq[i - 1], backward);
  pair.target_source = i - 1;
  pair.weight = weight_current.gamma;
  return pair;
}

TwinPair crop(const TwinPair& pair, const CropWindow& window) {
  TwinPair out;
  out.provenance = pair.provenance;
  out.target_source = pair.target_source;
  out.center = pair.center;
  out.input_stack.reserve(pair.input_stack.size());
  for (const auto& f : pair.input_stack) out.input_stack.push_back(crop(f, window));
  out.target = crop(pair.target, window);
  out.weight = crop(pair.weight, window);
  return out;
}

CropWindow random_crop(Eigen::Index rows, Eigen::Index cols, Eigen::Index crop_rows, Eigen::Index crop_cols,
                       std::mt19937_64& rng) {
  if (crop_rows > rows || crop_cols > cols || crop_rows <= 0 || crop_cols <= 0) {
    throw std::out_of_range("crop size exceeds frame");
  }
  std::uniform_int_distribution<Eigen::Index> top(0, rows - crop_rows);
  std::uniform_int_distribution<Eigen::Index> left(0, cols - crop_cols);
  const Eigen::Index t = top(rng);
  const Eigen::Index l = left(rng);
  return CropWindow{t, l, crop_rows, crop_cols};
}

MiniBatch assemble_batch(const FrameSequence& seq, const FrameSource& estimates, const SamplerConfig& cfg,
                         std::mt19937_64& rng) {
  if (seq.size() < 2 || seq.size() < std::min<std::size_t>(cfg.window, 2)) {
    throw std::invalid_argument("assemble_batch: sequence needs at least 2 frames");
  }
  if (cfg.batch_size == 0) throw std::invalid_argument("assemble_batch: batch size must be positive");
  MiniBatch batch;
  batch.crop_rows = std::min(cfg.crop, seq[0].rows());
  batch.crop_cols = std::min(cfg.crop, seq[0].cols());
  std::uniform_int_distribution<std::size_t> pick(1, seq.size() - 1);
  auto add = [&](const TwinPair& pair) {
    CropWindow w;
    for (int attempt = 0;; ++attempt) {
      w = random_crop(seq[0].rows(), seq[0].cols(), batch.crop_rows, batch.crop_cols, rng);
      const Image g = crop(pair.weight, w);
      const double masked = (g == 0.0).cast<double>().mean();
      if (masked <= cfg.max_masked_fraction || attempt + 1 >= cfg.crop_retries) break;
    }
    batch.pairs.push_back(crop(pair, w));
  };
  // Repeated draws of the same i reuse its analysis.
  std::map<std::size_t, PairCorrespondence> analyzed;
  while (batch.pairs.size() < cfg.batch_size) {
    const std::size_t i = pick(rng);
    auto it = analyzed.find(i);
    if (it == analyzed.end()) it = analyzed.emplace(i, analyze_pair(estimates, i, cfg)).first;
    const PairCorrespondence& corr = it->second;
    if (cfg.sampler == SamplerMode::kTwin) {
      const TwinPairs twins = build_twin_pairs(seq, corr, cfg.window);
      add(twins.previous);
      if (batch.pairs.size() < cfg.batch_size) add(twins.current);
    } else {
      add(build_naive_pair(seq, i, corr.flows.backward, corr.weight_current, cfg.window));
    }
  }
  return batch;
}

std::string to_string(OcclusionMode m) {
  switch (m) {
    case OcclusionMode::kConsistency: return "consistency";
    case OcclusionMode::kDivergence: return "divergence";
    case OcclusionMode::kNone: return "none";
  }
  return "?";
}

std::string to_string(SamplerMode m) { return m == SamplerMode::kTwin ? "twin" : "naive"; }

OcclusionMode parse_occlusion_mode(const std::string& s) {
  if (s == "consistency" || s == "ofc") return OcclusionMode::kConsistency;
  if (s == "divergence" || s == "div") return OcclusionMode::kDivergence;
  if (s == "none" || s == "off") return OcclusionMode::kNone;
  throw std::invalid_argument("unknown occlusion mode '" + s + "'");
}

SamplerMode parse_sampler_mode(const std::string& s) {
  if (s == "twin") return SamplerMode::kTwin;
  if (s == "naive") return SamplerMode::kNaive;
  throw std::invalid_argument("unknown sampler '" + s + "'");
}

}  // namespace blindloom
