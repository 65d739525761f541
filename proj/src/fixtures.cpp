#include "blindloom/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace blindloom {

Texture::Texture(Eigen::Index period, std::uint64_t seed, double mean, double amplitude) : mean_(mean) {
  if (period <= 0) throw std::invalid_argument("texture period must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> freq(-5, 5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> weight(0.5, 1.0);
  constexpr int kWaves = 6;
  double total = 0.0;
  while (waves_.size() < kWaves) {
    const int fx = freq(rng);
    const int fy = freq(rng);
    if (fx == 0 && fy == 0) continue;
    const double w = weight(rng);
    waves_.push_back({2.0 * std::numbers::pi * fx / static_cast<double>(period),
                      2.0 * std::numbers::pi * fy / static_cast<double>(period), phase(rng), w});
    total += w;
  }
  for (auto& w : waves_) w.amplitude *= amplitude / total;
}

double Texture::operator()(double x, double y) const {
  double v = mean_;
  for (const auto& w : waves_) v += w.amplitude * std::sin(w.fx * x + w.fy * y + w.phase);
  return v;
}

Image Texture::render(Eigen::Index rows, Eigen::Index cols, double dx, double dy) const {
  Image out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      out(r, c) = (*this)(static_cast<double>(c) - dx, static_cast<double>(r) - dy);
    }
  }
  return out;
}

namespace {

Frame textured(const std::vector<Texture>& tex, Eigen::Index size, double dx, double dy) {
  Frame f;
  for (const auto& t : tex) f.planes.push_back(t.render(size, size, dx, dy));
  return f;
}

std::vector<Texture> textures(Eigen::Index period, std::uint64_t seed, std::size_t channels, double mean = 128.0,
                              double amplitude = 80.0) {
  std::vector<Texture> out;
  for (std::size_t c = 0; c < channels; ++c) out.emplace_back(period, seed * 31 + c + 1, mean, amplitude);
  return out;
}

FlowField constant_flow(Eigen::Index size, double u, double v, FlowDirection dir) {
  FlowField f(Image::Constant(size, size, u), Image::Constant(size, size, v));
  f.direction = dir;
  return f;
}

// Pixels of a frame shifted by (dx, dy) whose source lies outside the previous frame.
Image entering_band(Eigen::Index size, double dx, double dy) {
  Image o = Image::Zero(size, size);
  for (Eigen::Index r = 0; r < size; ++r) {
    for (Eigen::Index c = 0; c < size; ++c) {
      const double sx = static_cast<double>(c) - dx;
      const double sy = static_cast<double>(r) - dy;
      if (sx < 0.0 || sy < 0.0 || sx > static_cast<double>(size - 1) || sy > static_cast<double>(size - 1)) {
        o(r, c) = 1.0;
      }
    }
  }
  return o;
}

// Triangle-wave positions in [0, range].
std::vector<Eigen::Index> bounce(Eigen::Index start, Eigen::Index speed, Eigen::Index range, std::size_t frames) {
  std::vector<Eigen::Index> out;
  Eigen::Index pos = start;
  Eigen::Index vel = speed;
  for (std::size_t t = 0; t < frames; ++t) {
    out.push_back(pos);
    Eigen::Index next = pos + vel;
    if (next > range) {
      next = 2 * range - next;
      vel = -vel;
    } else if (next < 0) {
      next = -next;
      vel = -vel;
    }
    pos = std::clamp<Eigen::Index>(next, 0, range);
  }
  return out;
}

Fixture occluder_square(const FixtureSpec& spec) {
  if (spec.square <= 0 || spec.square >= spec.size) throw std::invalid_argument("occluder square must fit the frame");
  std::mt19937_64 rng(spec.seed);
  const Eigen::Index range = spec.size - spec.square;
  std::uniform_int_distribution<Eigen::Index> place(0, range);
  const Eigen::Index top = place(rng);
  const Eigen::Index start = place(rng);
  const auto background = textures(spec.size, spec.seed * 2 + 1, spec.channels, 110.0, 70.0);
  const auto foreground = textures(spec.size, spec.seed * 2 + 2, spec.channels, 170.0, 60.0);
  Fixture fx;
  fx.square_left = bounce(start, spec.speed, range, spec.frames);
  auto inside = [&](std::size_t t, Eigen::Index r, Eigen::Index c) {
    return r >= top && r < top + spec.square && c >= fx.square_left[t] && c < fx.square_left[t] + spec.square;
  };
  for (std::size_t t = 0; t < spec.frames; ++t) {
    Frame f = textured(background, spec.size, 0.0, 0.0);
    const double left = static_cast<double>(fx.square_left[t]);
    for (std::size_t ch = 0; ch < spec.channels; ++ch) {
      for (Eigen::Index r = top; r < top + spec.square; ++r) {
        for (Eigen::Index c = fx.square_left[t]; c < fx.square_left[t] + spec.square; ++c) {
          f.planes[ch](r, c) = foreground[ch](static_cast<double>(c) - left, static_cast<double>(r));
        }
      }
    }
    fx.clean.frames.push_back(std::move(f));
  }
  for (std::size_t i = 1; i < spec.frames; ++i) {
    const double d = static_cast<double>(fx.square_left[i] - fx.square_left[i - 1]);
    FlowField fw = constant_flow(spec.size, 0.0, 0.0, FlowDirection::kForward);
    FlowField bw = constant_flow(spec.size, 0.0, 0.0, FlowDirection::kBackward);
    Image oc = Image::Zero(spec.size, spec.size);
    Image op = Image::Zero(spec.size, spec.size);
    for (Eigen::Index r = 0; r < spec.size; ++r) {
      for (Eigen::Index c = 0; c < spec.size; ++c) {
        const bool prev = inside(i - 1, r, c);
        const bool cur = inside(i, r, c);
        if (prev) fw.u(r, c) = d;
        if (cur) bw.u(r, c) = -d;
        if (prev && !cur) oc(r, c) = 1.0;  // background uncovered in frame i
        if (cur && !prev) op(r, c) = 1.0;  // background of frame i-1 covered in frame i
      }
    }
    fx.forward.push_back(std::move(fw));
    fx.backward.push_back(std::move(bw));
    fx.occlusion_current.push_back(std::move(oc));
    fx.occlusion_previous.push_back(std::move(op));
  }
  fx.gain.assign(spec.frames, 1.0);
  return fx;
}

}  // namespace

Fixture make_fixture(const FixtureSpec& spec) {
  if (spec.size <= 0) throw std::invalid_argument("fixture size must be positive");
  if (spec.frames < 2) throw std::invalid_argument("fixture needs at least 2 frames");
  if (spec.channels == 0) throw std::invalid_argument("fixture needs at least one channel");
  if (spec.kind == FixtureKind::kOccluderSquare) return occluder_square(spec);

  Fixture fx;
  const auto tex = textures(spec.size, spec.seed, spec.channels);
  const Eigen::Index n = spec.size;
  const Image none = Image::Zero(n, n);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    double dx = 0.0;
    double dy = 0.0;
    double gain = 1.0;
    if (spec.kind == FixtureKind::kTranslatingTexture) {
      dx = spec.shift_x * static_cast<double>(t);
      dy = spec.shift_y * static_cast<double>(t);
    } else if (spec.kind == FixtureKind::kLightingRamp) {
      const double s = static_cast<double>(t) / static_cast<double>(spec.frames - 1);
      gain = spec.gain_start + s * (spec.gain_end - spec.gain_start);
    }
    Frame f = textured(tex, n, dx, dy);
    for (auto& p : f.planes) p = (p * gain).cwiseMin(255.0).cwiseMax(0.0);
    fx.clean.frames.push_back(std::move(f));
    fx.gain.push_back(gain);
  }
  for (std::size_t i = 1; i < spec.frames; ++i) {
    if (spec.kind == FixtureKind::kTranslatingTexture) {
      fx.forward.push_back(constant_flow(n, spec.shift_x, spec.shift_y, FlowDirection::kForward));
      fx.backward.push_back(constant_flow(n, -spec.shift_x, -spec.shift_y, FlowDirection::kBackward));
      fx.occlusion_current.push_back(entering_band(n, spec.shift_x, spec.shift_y));
      fx.occlusion_previous.push_back(entering_band(n, -spec.shift_x, -spec.shift_y));
    } else {
      fx.forward.push_back(constant_flow(n, 0.0, 0.0, FlowDirection::kForward));
      fx.backward.push_back(constant_flow(n, 0.0, 0.0, FlowDirection::kBackward));
      fx.occlusion_current.push_back(none);
      fx.occlusion_previous.push_back(none);
    }
  }
  return fx;
}

FixtureKind parse_fixture_kind(const std::string& s) {
  if (s == "static-texture") return FixtureKind::kStaticTexture;
  if (s == "translating-texture") return FixtureKind::kTranslatingTexture;
  if (s == "occluder-square") return FixtureKind::kOccluderSquare;
  if (s == "lighting-ramp") return FixtureKind::kLightingRamp;
  throw std::invalid_argument("unknown fixture kind '" + s + "'");
}

std::string to_string(FixtureKind k) {
  switch (k) {
    case FixtureKind::kStaticTexture: return "static-texture";
    case FixtureKind::kTranslatingTexture: return "translating-texture";
    case FixtureKind::kOccluderSquare: return "occluder-square";
    case FixtureKind::kLightingRamp: return "lighting-ramp";
  }
  return "?";
}

std::vector<Frame> make_corpus(std::size_t count, Eigen::Index size, std::uint64_t seed, std::size_t channels) {
  std::vector<Frame> out;
  std::mt19937_64 rng(seed ^ 0xc0ffee0ddf00dULL);
  std::uniform_real_distribution<double> mean(90.0, 160.0);
  std::uniform_real_distribution<double> amplitude(40.0, 90.0);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t s = rng() | (1ULL << 63);
    Frame f = textured(textures(size, s, channels, mean(rng), amplitude(rng)), size, 0.0, 0.0);
    for (auto& p : f.planes) p = p.cwiseMin(255.0).cwiseMax(0.0);
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace blindloom
