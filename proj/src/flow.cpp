#include "blindloom/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace blindloom {

namespace {

Image gaussian_blur(const Image& in, double sigma) {
  if (sigma <= 0.0) return in;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& w : k) w /= sum;
  const Eigen::Index rows = in.rows();
  const Eigen::Index cols = in.cols();
  Image tmp(rows, cols);
  Image out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        s += k[static_cast<std::size_t>(i + radius)] * in(r, std::clamp<Eigen::Index>(x + i, 0, cols - 1));
      }
      tmp(r, x) = s;
    }
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i) {
        s += k[static_cast<std::size_t>(i + radius)] * tmp(std::clamp<Eigen::Index>(r + i, 0, rows - 1), x);
      }
      out(r, x) = s;
    }
  }
  return out;
}

Image resize_bilinear(const Image& in, Eigen::Index rows, Eigen::Index cols) {
  Image out(rows, cols);
  const double sy = static_cast<double>(in.rows()) / static_cast<double>(rows);
  const double sx = static_cast<double>(in.cols()) / static_cast<double>(cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      out(r, x) = sample_bilinear(in, (static_cast<double>(x) + 0.5) * sx - 0.5, (static_cast<double>(r) + 0.5) * sy - 0.5);
    }
  }
  return out;
}

void central_gradient(const Image& img, Image& gx, Image& gy) {
  const Eigen::Index rows = img.rows();
  const Eigen::Index cols = img.cols();
  gx.resize(rows, cols);
  gy.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      const Eigen::Index xl = std::max<Eigen::Index>(x - 1, 0);
      const Eigen::Index xr = std::min<Eigen::Index>(x + 1, cols - 1);
      const Eigen::Index ru = std::max<Eigen::Index>(r - 1, 0);
      const Eigen::Index rd = std::min<Eigen::Index>(r + 1, rows - 1);
      gx(r, x) = xr > xl ? (img(r, xr) - img(r, xl)) / static_cast<double>(xr - xl) : 0.0;
      gy(r, x) = rd > ru ? (img(rd, x) - img(ru, x)) / static_cast<double>(rd - ru) : 0.0;
    }
  }
}

// Linearised Horn-Schunck with warping at one pyramid level; u, v are
// refined in place.
void horn_schunck_level(const Image& a, const Image& b, Image& u, Image& v, const FlowSettings& s) {
  const Eigen::Index rows = a.rows();
  const Eigen::Index cols = a.cols();
  const double alpha2 = s.smoothness * s.smoothness;
  Image bx;
  Image by;
  central_gradient(b, bx, by);
  Image ix(rows, cols), iy(rows, cols), it(rows, cols);
  for (int w = 0; w < s.warps; ++w) {
    const FlowField current(u, v);
    Image outside;
    const Image bw = warp_inverse(b, current, &outside);
    ix = warp_inverse(bx, current);
    iy = warp_inverse(by, current);
    it = bw - a;
    // No data term where the correspondence left the image.
    for (Eigen::Index i = 0; i < outside.size(); ++i) {
      if (outside.data()[i] != 0.0) ix.data()[i] = iy.data()[i] = it.data()[i] = 0.0;
    }
    // Per-pixel constants of the linearised update.
    const Image inv = 1.0 / (alpha2 + ix * ix + iy * iy);
    const Image c0 = it - ix * u - iy * v;
    const Image gxx = ix * inv;
    const Image gyy = iy * inv;
    for (int iter = 0; iter < s.iterations; ++iter) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        const double* uu = &u(r > 0 ? r - 1 : r, 0);
        const double* ud = &u(r + 1 < rows ? r + 1 : r, 0);
        const double* vu = &v(r > 0 ? r - 1 : r, 0);
        const double* vd = &v(r + 1 < rows ? r + 1 : r, 0);
        double* ur = &u(r, 0);
        double* vr = &v(r, 0);
        const double* gxr = &ix(r, 0);
        const double* gyr = &iy(r, 0);
        const double* c0r = &c0(r, 0);
        const double* gxxr = &gxx(r, 0);
        const double* gyyr = &gyy(r, 0);
        for (Eigen::Index x = 0; x < cols; ++x) {
          const Eigen::Index xl = x > 0 ? x - 1 : x;
          const Eigen::Index xr = x + 1 < cols ? x + 1 : x;
          const double ubar = 0.25 * (uu[x] + ud[x] + ur[xl] + ur[xr]);
          const double vbar = 0.25 * (vu[x] + vd[x] + vr[xl] + vr[xr]);
          const double t = gxr[x] * ubar + gyr[x] * vbar + c0r[x];
          ur[x] += s.sor_omega * (ubar - gxxr[x] * t - ur[x]);
          vr[x] += s.sor_omega * (vbar - gyyr[x] * t - vr[x]);
        }
      }
    }
  }
}

Image to_unit_gray(const Frame& f) { return f.luminance() / 255.0; }

constexpr double kCurvatureFloor = 1e-6;

std::atomic<std::size_t> g_flow_estimations{0};

}  // namespace

std::size_t flow_estimation_count() { return g_flow_estimations.load(); }

double sample_bilinear(const Image& img, double x, double y, bool* outside) {
  const auto max_x = static_cast<double>(img.cols() - 1);
  const auto max_y = static_cast<double>(img.rows() - 1);
  const bool out = !(x >= -0.5 && x <= max_x + 0.5 && y >= -0.5 && y <= max_y + 0.5);
  if (outside) *outside = out;
  const double xc = std::clamp(x, 0.0, max_x);
  const double yc = std::clamp(y, 0.0, max_y);
  const auto x0 = static_cast<Eigen::Index>(std::floor(xc));
  const auto y0 = static_cast<Eigen::Index>(std::floor(yc));
  const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, img.cols() - 1);
  const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, img.rows() - 1);
  const double tx = xc - static_cast<double>(x0);
  const double ty = yc - static_cast<double>(y0);
  if (tx == 0.0 && ty == 0.0) return img(y0, x0);
  const double top = (1.0 - tx) * img(y0, x0) + tx * img(y0, x1);
  const double bottom = (1.0 - tx) * img(y1, x0) + tx * img(y1, x1);
  return (1.0 - ty) * top + ty * bottom;
}

Image warp_inverse(const Image& img, const FlowField& flow, Image* out_of_range) {
  require_same_size(img, flow.u, "warp_inverse");
  const Eigen::Index rows = img.rows();
  const Eigen::Index cols = img.cols();
  Image out(rows, cols);
  if (out_of_range) out_of_range->setZero(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      bool outside = false;
      out(r, x) = sample_bilinear(img, static_cast<double>(x) + flow.u(r, x), static_cast<double>(r) + flow.v(r, x),
                                  &outside);
      if (out_of_range && outside) (*out_of_range)(r, x) = 1.0;
    }
  }
  return out;
}

Frame warp_inverse(const Frame& frame, const FlowField& flow, Image* out_of_range) {
  Frame out;
  out.planes.reserve(frame.channels());
  for (std::size_t c = 0; c < frame.channels(); ++c) {
    out.planes.push_back(warp_inverse(frame.planes[c], flow, c == 0 ? out_of_range : nullptr));
  }
  return out;
}

FlowField estimate_flow(const Frame& a, const Frame& b, const FlowSettings& s) {
  if (!a.same_shape(b)) throw std::invalid_argument("estimate_flow: frames differ in shape");
  if (s.levels < 1) throw std::invalid_argument("estimate_flow: levels must be >= 1");
  ++g_flow_estimations;
  std::vector<Image> pa{gaussian_blur(to_unit_gray(a), s.presmooth_sigma)};
  std::vector<Image> pb{gaussian_blur(to_unit_gray(b), s.presmooth_sigma)};
  for (int l = 1; l < s.levels; ++l) {
    const Eigen::Index rows = (pa.back().rows() + 1) / 2;
    const Eigen::Index cols = (pa.back().cols() + 1) / 2;
    pa.push_back(resize_bilinear(gaussian_blur(pa.back(), 1.0), rows, cols));
    pb.push_back(resize_bilinear(gaussian_blur(pb.back(), 1.0), rows, cols));
  }
  if (std::min(pa.back().rows(), pa.back().cols()) < s.min_level_size) {
    throw std::invalid_argument("estimate_flow: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " frames are too small for " + std::to_string(s.levels) + " pyramid levels");
  }
  Image u = Image::Zero(pa.back().rows(), pa.back().cols());
  Image v = u;
  for (int l = s.levels - 1; l >= 0; --l) {
    const auto& la = pa[static_cast<std::size_t>(l)];
    const auto& lb = pb[static_cast<std::size_t>(l)];
    if (u.rows() != la.rows() || u.cols() != la.cols()) {
      const double fx = static_cast<double>(la.cols()) / static_cast<double>(u.cols());
      const double fy = static_cast<double>(la.rows()) / static_cast<double>(u.rows());
      u = resize_bilinear(u, la.rows(), la.cols()) * fx;
      v = resize_bilinear(v, la.rows(), la.cols()) * fy;
    }
    horn_schunck_level(la, lb, u, v, s);
  }
  const double bound = static_cast<double>(std::max(a.rows(), a.cols()));
  u = u.max(-bound).min(bound);
  v = v.max(-bound).min(bound);
  return FlowField(std::move(u), std::move(v));
}

FlowPair flow_pair(const FrameSource& source, std::size_t i, const FlowSettings& settings) {
  if (i == 0) throw std::out_of_range("flow_pair: index must be >= 1");
  const Frame prev = source(i - 1);
  const Frame cur = source(i);
  FlowPair p{estimate_flow(prev, cur, settings), estimate_flow(cur, prev, settings)};
  p.forward.direction = FlowDirection::kForward;
  p.backward.direction = FlowDirection::kBackward;
  return p;
}

double endpoint_error(const FlowField& estimate, const FlowField& truth) {
  require_same_size(estimate.u, truth.u, "endpoint_error");
  if (estimate.u.size() == 0) return 0.0;
  return ((estimate.u - truth.u).square() + (estimate.v - truth.v).square()).sqrt().mean();
}

double median_endpoint_error(const FlowField& estimate, const FlowField& truth, Eigen::Index margin) {
  require_same_size(estimate.u, truth.u, "median_endpoint_error");
  std::vector<double> e;
  for (Eigen::Index r = margin; r < estimate.rows() - margin; ++r) {
    for (Eigen::Index x = margin; x < estimate.cols() - margin; ++x) {
      e.push_back(std::hypot(estimate.u(r, x) - truth.u(r, x), estimate.v(r, x) - truth.v(r, x)));
    }
  }
  if (e.empty()) return 0.0;
  auto mid = e.begin() + static_cast<std::ptrdiff_t>(e.size() / 2);
  std::nth_element(e.begin(), mid, e.end());
  return *mid;
}

double hybrid_flow_loss(const FlowField& estimate, const FlowGroundTruth& truth, const Frame& a, const Frame& b,
                        double lambda) {
  require_same_size(estimate.u, truth.flow.u, "hybrid_flow_loss");
  if (!a.same_shape(b)) throw std::invalid_argument("hybrid_flow_loss: frames differ in shape");
  require_same_size(a.planes.front(), estimate.u, "hybrid_flow_loss");
  require_same_size(truth.occlusion, estimate.u, "hybrid_flow_loss");
  const double epe = endpoint_error(estimate, truth.flow);
  double warp_term = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    const Image diff = (1.0 - truth.occlusion) * (a.planes[c] - warp_inverse(b.planes[c], estimate)) / 255.0;
    warp_term += diff.square().mean();
  }
  warp_term /= static_cast<double>(a.channels());
  return epe + lambda * warp_term;
}

double refine_objective(const FlowField& flow, const FlowField& init, const Image& a, const Image& b,
                        const Image& occlusion, const RefineSettings& s) {
  const Image residual = (1.0 - occlusion) * (a - warp_inverse(b, flow));
  const double dev = ((flow.u - init.u).square() + (flow.v - init.v).square()).mean();
  return s.lambda * residual.square().mean() + s.lambda_dev * dev;
}

FlowField refine_flow(const FlowField& init, const Frame& a, const Frame& b, const Image& occlusion,
                      const RefineSettings& s) {
  if (s.steps < 0) throw std::invalid_argument("refine_flow: steps must be >= 0");
  if (s.steps == 0) return init;
  const Image ga = to_unit_gray(a);
  const Image gb = to_unit_gray(b);
  require_same_size(ga, init.u, "refine_flow");
  require_same_size(occlusion, init.u, "refine_flow");
  const Eigen::Index rows = ga.rows();
  const Eigen::Index cols = ga.cols();
  FlowField flow = init;
  double objective = refine_objective(flow, init, ga, gb, occlusion, s);
  double step = s.step_size;
  Image gu(rows, cols), gv(rows, cols);
  for (int k = 0; k < s.steps; ++k) {
    // Gradient of the summed objective, scaled per pixel by the diagonal of
    // its Gauss-Newton Hessian and limited to one pixel per step.
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index x = 0; x < cols; ++x) {
        const double sx = static_cast<double>(x) + flow.u(r, x);
        const double sy = static_cast<double>(r) + flow.v(r, x);
        bool outside = false;
        const double bw = sample_bilinear(gb, sx, sy, &outside);
        double dbx = 0.0, dby = 0.0;
        if (!outside) {
          const auto x0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(sx)), cols - 2);
          const auto y0 = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(sy)), rows - 2);
          const double tx = sx - static_cast<double>(x0);
          const double ty = sy - static_cast<double>(y0);
          dbx = (1.0 - ty) * (gb(y0, x0 + 1) - gb(y0, x0)) + ty * (gb(y0 + 1, x0 + 1) - gb(y0 + 1, x0));
          dby = (1.0 - tx) * (gb(y0 + 1, x0) - gb(y0, x0)) + tx * (gb(y0 + 1, x0 + 1) - gb(y0, x0 + 1));
        }
        const double m = 1.0 - occlusion(r, x);
        const double res = m * (ga(r, x) - bw);
        const double du = -2.0 * s.lambda * res * m * dbx + 2.0 * s.lambda_dev * (flow.u(r, x) - init.u(r, x));
        const double dv = -2.0 * s.lambda * res * m * dby + 2.0 * s.lambda_dev * (flow.v(r, x) - init.v(r, x));
        const double hu = 2.0 * s.lambda * m * dbx * dbx + 2.0 * s.lambda_dev + kCurvatureFloor;
        const double hv = 2.0 * s.lambda * m * dby * dby + 2.0 * s.lambda_dev + kCurvatureFloor;
        gu(r, x) = std::clamp(du / hu, -1.0, 1.0);
        gv(r, x) = std::clamp(dv / hv, -1.0, 1.0);
      }
    }
    bool accepted = false;
    for (int halvings = 0; halvings < 30 && !accepted; ++halvings) {
      FlowField trial(flow.u - step * gu, flow.v - step * gv, flow.direction);
      const double t = refine_objective(trial, init, ga, gb, occlusion, s);
      if (t <= objective) {
        flow = std::move(trial);
        objective = t;
        accepted = true;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) break;
  }
  return flow;
}

}  // namespace blindloom
