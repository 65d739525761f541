#include "blindloom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace blindloom {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

void require_same_frame(const Frame& a, const Frame& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": frames differ in shape");
}

Eigen::VectorXd gaussian_window() {
  Eigen::VectorXd g(kWindow);
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
  }
  return g / g.sum();
}

// Separable "valid" filtering with the normalised Gaussian window.
Image filter_valid(const Image& img, const Eigen::VectorXd& g) {
  const Eigen::Index rows = img.rows() - kWindow + 1;
  const Eigen::Index cols = img.cols() - kWindow + 1;
  Image horiz = Image::Zero(img.rows(), cols);
  for (int k = 0; k < kWindow; ++k) horiz += g[k] * img.middleCols(k, cols);
  Image out = Image::Zero(rows, cols);
  for (int k = 0; k < kWindow; ++k) out += g[k] * horiz.middleRows(k, rows);
  return out;
}

}  // namespace

double psnr(const Frame& a, const Frame& b) {
  require_same_frame(a, b, "psnr");
  double sq = 0.0;
  double count = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    sq += (a.planes[c] - b.planes[c]).square().sum();
    count += static_cast<double>(a.planes[c].size());
  }
  if (count == 0.0) throw std::invalid_argument("psnr: empty frames");
  const double mse = sq / count;
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const Image& a, const Image& b) {
  require_same_size(a, b, "ssim");
  if (a.rows() < kWindow || a.cols() < kWindow) {
    throw std::invalid_argument("ssim: frame smaller than the 11x11 window");
  }
  const Eigen::VectorXd g = gaussian_window();
  const Image mu_a = filter_valid(a, g);
  const Image mu_b = filter_valid(b, g);
  const Image var_a = filter_valid(a * a, g) - mu_a * mu_a;
  const Image var_b = filter_valid(b * b, g) - mu_b * mu_b;
  const Image cov = filter_valid(a * b, g) - mu_a * mu_b;
  const Image num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
  const Image den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
  return (num / den).mean();
}

double ssim(const Frame& a, const Frame& b) {
  require_same_frame(a, b, "ssim");
  if (a.channels() == 0) throw std::invalid_argument("ssim: empty frames");
  double total = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) total += ssim(a.planes[c], b.planes[c]);
  return total / static_cast<double>(a.channels());
}

std::vector<double> psnr_per_frame(const FrameSequence& a, const FrameSequence& b) {
  if (a.size() != b.size()) throw std::invalid_argument("psnr: sequences differ in length");
  std::vector<double> out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(psnr(a[i], b[i]));
  return out;
}

std::vector<double> ssim_per_frame(const FrameSequence& a, const FrameSequence& b) {
  if (a.size() != b.size()) throw std::invalid_argument("ssim: sequences differ in length");
  std::vector<double> out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(ssim(a[i], b[i]));
  return out;
}

double mean(const std::vector<double>& values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string format_metric(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

}  // namespace blindloom
