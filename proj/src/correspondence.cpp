#include "blindloom/correspondence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace blindloom {

OcclusionMask occlusion_consistency(const FlowField& forward, const FlowField& backward,
                                    const CorrespondenceParams& params) {
  require_same_size(forward.u, backward.u, "occlusion_consistency");
  const Eigen::Index rows = backward.rows();
  const Eigen::Index cols = backward.cols();
  OcclusionMask mask{Image::Zero(rows, cols)};
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      const double bu = backward.u(r, x);
      const double bv = backward.v(r, x);
      const double qx = static_cast<double>(x) + bu;
      const double qy = static_cast<double>(r) + bv;
      bool outside = false;
      const double fu = sample_bilinear(forward.u, qx, qy, &outside);
      const double fv = sample_bilinear(forward.v, qx, qy);
      if (outside) {
        mask.occluded(r, x) = 1.0;
        continue;
      }
      const double lhs = (bu + fu) * (bu + fu) + (bv + fv) * (bv + fv);
      const double rhs = params.alpha1 * (bu * bu + bv * bv + fu * fu + fv * fv) + params.alpha2;
      mask.occluded(r, x) = lhs < rhs ? 0.0 : 1.0;
    }
  }
  return mask;
}

Image flow_divergence(const FlowField& flow) {
  const Eigen::Index rows = flow.rows();
  const Eigen::Index cols = flow.cols();
  Image div(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      const Eigen::Index xl = std::max<Eigen::Index>(x - 1, 0);
      const Eigen::Index xr = std::min<Eigen::Index>(x + 1, cols - 1);
      const Eigen::Index ru = std::max<Eigen::Index>(r - 1, 0);
      const Eigen::Index rd = std::min<Eigen::Index>(r + 1, rows - 1);
      const double dudx = xr > xl ? (flow.u(r, xr) - flow.u(r, xl)) / static_cast<double>(xr - xl) : 0.0;
      const double dvdy = rd > ru ? (flow.v(rd, x) - flow.v(ru, x)) / static_cast<double>(rd - ru) : 0.0;
      div(r, x) = dudx + dvdy;
    }
  }
  return div;
}

OcclusionMask occlusion_divergence(const FlowField& flow, double threshold) {
  const Image div = flow_divergence(flow);
  return OcclusionMask{(div < -threshold).cast<double>()};
}

OcclusionMask merge(const OcclusionMask& a, const Image& flags) {
  require_same_size(a.occluded, flags, "merge");
  return OcclusionMask{((a.occluded != 0.0) || (flags != 0.0)).cast<double>()};
}

CleanEstimates clean_estimates(const Frame& previous_estimate, const Frame& current_estimate,
                               const FlowField& backward) {
  if (!previous_estimate.same_shape(current_estimate)) {
    throw std::invalid_argument("clean_estimates: estimates differ in shape");
  }
  return CleanEstimates{current_estimate, warp_inverse(previous_estimate, backward)};
}

CleanEstimates clean_estimates(const FrameSource& source, std::size_t i, const FlowField& backward) {
  if (i == 0) throw std::out_of_range("clean_estimates: index must be >= 1");
  return clean_estimates(source(i - 1), source(i), backward);
}

Image box_filter(const Image& img, int size) {
  if (size < 1 || size % 2 == 0) throw std::invalid_argument("box_filter: size must be odd and positive");
  const int half = size / 2;
  const Eigen::Index rows = img.rows();
  const Eigen::Index cols = img.cols();
  // Zero-padded integral image.
  Eigen::ArrayXXd integral = Eigen::ArrayXXd::Zero(rows + 1, cols + 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      integral(r + 1, x + 1) = img(r, x) + integral(r, x + 1) + integral(r + 1, x) - integral(r, x);
    }
  }
  const double norm = 1.0 / static_cast<double>(size * size);
  Image out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index r0 = std::max<Eigen::Index>(r - half, 0);
    const Eigen::Index r1 = std::min<Eigen::Index>(r + half + 1, rows);
    for (Eigen::Index x = 0; x < cols; ++x) {
      const Eigen::Index x0 = std::max<Eigen::Index>(x - half, 0);
      const Eigen::Index x1 = std::min<Eigen::Index>(x + half + 1, cols);
      out(r, x) = norm * (integral(r1, x1) - integral(r0, x1) - integral(r1, x0) + integral(r0, x0));
    }
  }
  return out;
}

LightingMap lighting_variation(const Frame& estimate, const Frame& aligned, const OcclusionMask& occlusion,
                               const CorrespondenceParams& params) {
  if (!estimate.same_shape(aligned)) throw std::invalid_argument("lighting_variation: estimates differ in shape");
  require_same_size(estimate.planes.front(), occlusion.occluded, "lighting_variation");
  const Image visible = 1.0 - occlusion.occluded;
  const Image diff = (estimate.luminance() - aligned.luminance()) / 255.0;
  const Image num = box_filter(diff * visible, params.box_size).abs();
  const Image den = box_filter(visible, params.box_size) + params.epsilon;
  return LightingMap{num / den};
}

double lighting_weight(double lighting, double alpha3) { return std::exp(-alpha3 * lighting); }

WeightMap weight_map(const OcclusionMask& occlusion, const LightingMap& lighting, double alpha3) {
  require_same_size(occlusion.occluded, lighting.value, "weight_map");
  return WeightMap{(1.0 - occlusion.occluded) * (-alpha3 * lighting.value).exp()};
}

MaskScore mask_f1(const Image& predicted, const Image& truth) {
  require_same_size(predicted, truth, "mask_f1");
  const auto p = predicted != 0.0;
  const auto t = truth != 0.0;
  const double tp = (p && t).cast<double>().sum();
  const double fp = (p && !t).cast<double>().sum();
  const double fn = (!p && t).cast<double>().sum();
  MaskScore s;
  if (tp + fp + fn == 0.0) return MaskScore{1.0, 1.0, 1.0};
  s.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  s.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
  s.f1 = 2.0 * tp / (2.0 * tp + fp + fn);
  return s;
}

}  // namespace blindloom
