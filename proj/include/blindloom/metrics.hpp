#pragma once

#include "blindloom/image.hpp"

#include <string>
#include <vector>

namespace blindloom {

// 10 log10(255^2 / MSE) over all channels; identical frames give +infinity.
double psnr(const Frame& a, const Frame& b);

// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, L 255) averaged
// over windows that fit entirely inside the frame, then over channels.
double ssim(const Frame& a, const Frame& b);
double ssim(const Image& a, const Image& b);

std::vector<double> psnr_per_frame(const FrameSequence& a, const FrameSequence& b);
std::vector<double> ssim_per_frame(const FrameSequence& a, const FrameSequence& b);

double mean(const std::vector<double>& values);
double median(std::vector<double> values);

// Fixed six-decimal rendering; infinities print as "inf" / "-inf".
std::string format_metric(double value);

}  // namespace blindloom
