#pragma once

#include "blindloom/flow.hpp"
#include "blindloom/image.hpp"

namespace blindloom {

struct CorrespondenceParams {
  double alpha1 = 0.0064;  // relative consistency threshold
  double alpha2 = 1.4;     // absolute consistency threshold (px^2)
  double alpha3 = 5.0;     // lighting-variation sharpness
  double epsilon = 1e-6;
  int box_size = 5;
  double divergence_threshold = 0.3;
};

// Forward-backward consistency check for the frame the backward flow starts
// from (o_i when called with (w^f, w^b)). A pixel p is visible iff
//   |wb(p) + wf(q)|^2 < alpha1 (|wb(p)|^2 + |wf(q)|^2) + alpha2,  q = p + wb(p),
// with wf(q) sampled bilinearly. Lookups that leave the image are occluded.
// Swap the arguments to obtain o_{i-1}.
OcclusionMask occlusion_consistency(const FlowField& forward, const FlowField& backward,
                                    const CorrespondenceParams& params = {});

// Central-difference divergence du/dx + dv/dy (one-sided at the border).
Image flow_divergence(const FlowField& flow);

// Occluded where the flow contracts: divergence < -threshold.
OcclusionMask occlusion_divergence(const FlowField& flow, double threshold);

// OR of two masks (e.g. consistency with warp out-of-range flags).
OcclusionMask merge(const OcclusionMask& a, const Image& flags);

struct CleanEstimates {
  Frame current;  // x_hat_i
  Frame aligned;  // x_hat'_i: previous estimate warped onto frame i
};

// x_hat_i = source(i), x_hat'_i = warp(source(i-1), backward). `source` gives
// the denoiser's output when online denoising is enabled and the raw noisy
// frame otherwise.
CleanEstimates clean_estimates(const FrameSource& source, std::size_t i, const FlowField& backward);
CleanEstimates clean_estimates(const Frame& previous_estimate, const Frame& current_estimate,
                               const FlowField& backward);

// Normalised 5x5 box filter with zero padding.
Image box_filter(const Image& img, int size);

// l = |box(d * (1 - o))| / (box(1 - o) + eps), d = channel mean of the
// difference on the [0, 1] scale. Inputs are frames on the [0, 255] scale.
LightingMap lighting_variation(const Frame& estimate, const Frame& aligned, const OcclusionMask& occlusion,
                               const CorrespondenceParams& params = {});

// xi(l) = exp(-alpha3 * l)
double lighting_weight(double lighting, double alpha3);

// gamma = (1 - o) * exp(-alpha3 * l)
WeightMap weight_map(const OcclusionMask& occlusion, const LightingMap& lighting, double alpha3);

struct MaskScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Precision/recall/F1 of `predicted` against `truth` (1 = positive). When
// both masks are empty the score is perfect.
MaskScore mask_f1(const Image& predicted, const Image& truth);

}  // namespace blindloom
