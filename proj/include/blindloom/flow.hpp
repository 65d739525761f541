#pragma once

#include "blindloom/image.hpp"

#include <functional>

namespace blindloom {

// Settings of the pyramidal Horn-Schunck estimator. Intensities are mapped
// to [0, 1] (channel mean / 255) before estimation, so `smoothness` is
// relative to that scale.
struct FlowSettings {
  int levels = 3;
  double smoothness = 0.05;
  int warps = 3;
  int iterations = 20;
  double presmooth_sigma = 0.8;
  double sor_omega = 1.8;
  int min_level_size = 8;
};

// Dense flow from a to b, i.e. a(p) ~ b(p + w(p)). Zero initialisation at the
// coarsest level; homogeneous frames therefore yield zero flow.
FlowField estimate_flow(const Frame& a, const Frame& b, const FlowSettings& settings = {});

// Number of estimate_flow calls made so far in this process.
std::size_t flow_estimation_count();

// Bilinear sample with clamp-to-edge; sets *outside when (x, y) lies beyond
// the pixel footprint [-0.5, cols-0.5] x [-0.5, rows-0.5].
double sample_bilinear(const Image& img, double x, double y, bool* outside = nullptr);

// out(p) = img(p + flow(p)). `out_of_range`, when given, receives 1 where the
// sample position left the image (value taken from the clamped position).
Image warp_inverse(const Image& img, const FlowField& flow, Image* out_of_range = nullptr);
Frame warp_inverse(const Frame& frame, const FlowField& flow, Image* out_of_range = nullptr);

// Maps a frame index to a (possibly denoised) version of that frame.
using FrameSource = std::function<Frame(std::size_t)>;

struct FlowPair {
  FlowField forward;   // Gamma(y_{i-1}, y_i)
  FlowField backward;  // Gamma(y_i, y_{i-1})
};

// Forward/backward flows between frames i-1 and i computed on the frames
// returned by `source` (the denoiser's outputs for online denoising, or the
// raw noisy frames for the ablation).
FlowPair flow_pair(const FrameSource& source, std::size_t i, const FlowSettings& settings = {});

struct FlowGroundTruth {
  FlowField flow;
  Image occlusion;  // 1 = occluded in a
};

// Mean Euclidean distance between two flows.
double endpoint_error(const FlowField& estimate, const FlowField& truth);
// Median Euclidean distance over pixels whose border distance is >= margin.
double median_endpoint_error(const FlowField& estimate, const FlowField& truth, Eigen::Index margin = 0);

// Average endpoint error plus lambda * pixel-mean of
// ((1 - o_a) * (a - warp(b, estimate)))^2 on the [0, 1] intensity scale.
double hybrid_flow_loss(const FlowField& estimate, const FlowGroundTruth& truth, const Frame& a, const Frame& b,
                        double lambda);

struct RefineSettings {
  int steps = 20;
  double step_size = 1.0;  // multiplies the curvature-scaled gradient
  double lambda = 0.06;
  double lambda_dev = 1e-4;
};

// Objective minimised by refine_flow (pixel means, [0, 1] intensities):
//   lambda * mean((1 - o) * (a - warp(b, w)))^2 + lambda_dev * mean |w - w0|^2
double refine_objective(const FlowField& flow, const FlowField& init, const Image& a, const Image& b,
                        const Image& occlusion, const RefineSettings& settings);

// Diagonally preconditioned gradient descent on refine_objective starting at
// `init` (at most 1 px per pixel per step). A step that would
// increase the objective is retried with half the step size; the returned
// flow never has a larger objective than `init`.
FlowField refine_flow(const FlowField& init, const Frame& a, const Frame& b, const Image& occlusion,
                      const RefineSettings& settings = {});

}  // namespace blindloom
