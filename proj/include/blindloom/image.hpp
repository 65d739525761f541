#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blindloom {

template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Image = Plane<double>;

// One video frame: `planes.size()` channels of identical (rows, cols),
// intensities on the [0, 255] scale.
struct Frame {
  std::vector<Image> planes;

  Frame() = default;
  explicit Frame(std::vector<Image> p) : planes(std::move(p)) {}
  Frame(std::size_t channels, Eigen::Index rows, Eigen::Index cols, double fill = 0.0)
      : planes(channels, Image::Constant(rows, cols, fill)) {}

  std::size_t channels() const { return planes.size(); }
  Eigen::Index rows() const { return planes.empty() ? 0 : planes.front().rows(); }
  Eigen::Index cols() const { return planes.empty() ? 0 : planes.front().cols(); }
  bool same_shape(const Frame& o) const {
    return channels() == o.channels() && rows() == o.rows() && cols() == o.cols();
  }

  // Channel mean.
  Image luminance() const {
    Image out = Image::Zero(rows(), cols());
    for (const auto& p : planes) out += p;
    if (!planes.empty()) out /= static_cast<double>(planes.size());
    return out;
  }
};

struct FrameSequence {
  std::vector<Frame> frames;
  std::optional<double> frame_rate;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  const Frame& operator[](std::size_t i) const { return frames[i]; }
  Frame& operator[](std::size_t i) { return frames[i]; }
};

enum class FlowDirection { kForward, kBackward };

// Per-pixel displacement in pixels; u along columns (x), v along rows (y).
// A flow w from frame a to frame b satisfies a(p) ~ b(p + w(p)).
struct FlowField {
  Image u;
  Image v;
  FlowDirection direction = FlowDirection::kForward;

  FlowField() = default;
  FlowField(Eigen::Index rows, Eigen::Index cols, FlowDirection dir = FlowDirection::kForward)
      : u(Image::Zero(rows, cols)), v(Image::Zero(rows, cols)), direction(dir) {}
  FlowField(Image uu, Image vv, FlowDirection dir = FlowDirection::kForward)
      : u(std::move(uu)), v(std::move(vv)), direction(dir) {}

  Eigen::Index rows() const { return u.rows(); }
  Eigen::Index cols() const { return u.cols(); }
};

// 1 = occluded (no valid correspondence in the neighbouring frame).
struct OcclusionMask {
  Image occluded;
};

struct LightingMap {
  Image value;
};

struct WeightMap {
  Image gamma;
};

inline void require_same_size(const Image& a, const Image& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": size mismatch " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
}

}  // namespace blindloom
