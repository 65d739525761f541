#include "blindloom/noise.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace blindloom {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double clip_round(double v) { return std::round(std::clamp(v, 0.0, 255.0)); }

Image box3(const Image& in) {
  const Eigen::Index rows = in.rows();
  const Eigen::Index cols = in.cols();
  Image out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const Eigen::Index rr = std::clamp<Eigen::Index>(r + dy, 0, rows - 1);
          const Eigen::Index xx = std::clamp<Eigen::Index>(x + dx, 0, cols - 1);
          s += in(rr, xx);
        }
      }
      out(r, x) = s / 9.0;
    }
  }
  return out;
}

double parse_number(const std::string& tok, const std::string& spec) {
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("noise spec '" + spec + "': bad number '" + tok + "'");
  return v;
}

}  // namespace

std::uint64_t CounterRng::bits(std::uint64_t frame, std::uint64_t channel, std::uint64_t pixel,
                               std::uint64_t stream) const {
  std::uint64_t h = splitmix64(seed_);
  h = splitmix64(h ^ frame);
  h = splitmix64(h ^ (channel << 8 | (stream & 0xFF)) ^ (stream << 32));
  return splitmix64(h ^ pixel);
}

double CounterRng::uniform(std::uint64_t frame, std::uint64_t channel, std::uint64_t pixel,
                           std::uint64_t stream) const {
  return (static_cast<double>(bits(frame, channel, pixel, stream) >> 11) + 1.0) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t frame, std::uint64_t channel, std::uint64_t pixel,
                          std::uint64_t stream) const {
  const double u1 = uniform(frame, channel, pixel, 2 * stream);
  const double u2 = uniform(frame, channel, pixel, 2 * stream + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void validate(const NoiseModel& model) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Awgn> || std::is_same_v<T, CorrelatedGaussian> ||
                      std::is_same_v<T, MultiplicativeGaussian>) {
          if (!(v.sigma > 0.0)) throw std::invalid_argument("noise sigma must be > 0");
        } else if constexpr (std::is_same_v<T, ImpulseRandom>) {
          if (!(v.probability >= 0.0 && v.probability <= 1.0)) {
            throw std::invalid_argument("impulse probability must be in [0, 1]");
          }
          if (!(v.low <= v.high)) throw std::invalid_argument("impulse range must satisfy low <= high");
        } else if constexpr (std::is_same_v<T, JpegGaussian>) {
          if (!(v.sigma > 0.0)) throw std::invalid_argument("noise sigma must be > 0");
          if (v.quality < 1 || v.quality > 100) throw std::invalid_argument("jpeg quality must be in [1, 100]");
        }
      },
      model.variant);
}

NoiseVariant parse_noise(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ':')) parts.push_back(tok);
  if (parts.empty()) throw std::invalid_argument("empty noise spec");
  std::string name = parts[0];
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  auto arg = [&](std::size_t i, double fallback) {
    return i < parts.size() ? parse_number(parts[i], text) : fallback;
  };
  if (parts.size() > 3) throw std::invalid_argument("noise spec '" + text + "': too many parameters");
  NoiseVariant v;
  if (name == "awgn") {
    v = Awgn{arg(1, 20.0)};
  } else if (name == "mg") {
    v = MultiplicativeGaussian{arg(1, 0.3)};
  } else if (name == "cg") {
    v = CorrelatedGaussian{arg(1, 25.0)};
  } else if (name == "ir") {
    v = ImpulseRandom{arg(1, 0.1), 0.0, 255.0};
  } else if (name == "jpeg") {
    const double q = arg(2, 60.0);
    if (q != std::floor(q)) throw std::invalid_argument("jpeg quality must be an integer");
    v = JpegGaussian{arg(1, 25.0), static_cast<int>(q)};
  } else {
    throw std::invalid_argument("unknown noise model '" + parts[0] + "'");
  }
  validate(NoiseModel{v, 0});
  return v;
}

std::string describe(const NoiseVariant& v) {
  std::ostringstream os;
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Awgn>) os << "awgn:" << n.sigma;
        else if constexpr (std::is_same_v<T, MultiplicativeGaussian>) os << "mg:" << n.sigma;
        else if constexpr (std::is_same_v<T, CorrelatedGaussian>) os << "cg:" << n.sigma;
        else if constexpr (std::is_same_v<T, ImpulseRandom>) os << "ir:" << n.probability;
        else os << "jpeg:" << n.sigma << ":" << n.quality;
      },
      v);
  return os.str();
}

Frame apply_noise(const NoiseModel& model, const Frame& clean, std::uint64_t frame_index) {
  validate(model);
  const CounterRng rng(model.seed);
  const Eigen::Index rows = clean.rows();
  const Eigen::Index cols = clean.cols();
  Frame out = clean;
  for (std::size_t c = 0; c < clean.channels(); ++c) {
    const Image& x = clean.planes[c];
    Image& y = out.planes[c];
    auto gaussian_field = [&](double sigma) {
      Image n(rows, cols);
      for (Eigen::Index i = 0; i < n.size(); ++i) {
        n.data()[i] = sigma * rng.normal(frame_index, c, static_cast<std::uint64_t>(i));
      }
      return n;
    };
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Awgn>) {
            y = x + gaussian_field(v.sigma);
          } else if constexpr (std::is_same_v<T, MultiplicativeGaussian>) {
            y = x * (1.0 + gaussian_field(v.sigma));
          } else if constexpr (std::is_same_v<T, CorrelatedGaussian>) {
            y = x + box3(gaussian_field(v.sigma));
          } else if constexpr (std::is_same_v<T, ImpulseRandom>) {
            for (Eigen::Index i = 0; i < y.size(); ++i) {
              const auto p = static_cast<std::uint64_t>(i);
              // uniform() is in (0, 1]; shift to [0, 1) for the replacement test.
              if (1.0 - rng.uniform(frame_index, c, p, 10) < v.probability) {
                y.data()[i] = v.low + (v.high - v.low) * (1.0 - rng.uniform(frame_index, c, p, 11));
              }
            }
          } else {
            y = (x + gaussian_field(v.sigma)).unaryExpr(&clip_round);
          }
        },
        model.variant);
  }
  if (const auto* j = std::get_if<JpegGaussian>(&model.variant)) out = jpeg_degrade(out, j->quality);
  for (auto& p : out.planes) p = p.unaryExpr(&clip_round);
  return out;
}

FrameSequence apply_noise(const NoiseModel& model, const FrameSequence& clean) {
  FrameSequence out;
  out.frame_rate = clean.frame_rate;
  out.frames.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) out.frames.push_back(apply_noise(model, clean[i], i));
  return out;
}

// ---------------------------------------------------------------------------

const std::array<int, 64> kJpegLuminanceTable = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99};

std::array<int, 64> jpeg_quant_table(int quality) {
  if (quality < 1 || quality > 100) throw std::invalid_argument("jpeg quality must be in [1, 100]");
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> q{};
  for (std::size_t i = 0; i < 64; ++i) q[i] = std::clamp((kJpegLuminanceTable[i] * scale + 50) / 100, 1, 255);
  return q;
}

namespace {

// Orthonormal 8-point DCT-II basis, basis(k, n).
Eigen::Matrix<double, 8, 8> dct_basis() {
  Eigen::Matrix<double, 8, 8> m;
  for (int k = 0; k < 8; ++k) {
    const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
    for (int n = 0; n < 8; ++n) m(k, n) = a * std::cos(std::numbers::pi * (2 * n + 1) * k / 16.0);
  }
  return m;
}

}  // namespace

Frame jpeg_degrade(const Frame& frame, int quality) {
  const auto table = jpeg_quant_table(quality);
  Eigen::Matrix<double, 8, 8> q;
  for (int i = 0; i < 64; ++i) q(i / 8, i % 8) = table[static_cast<std::size_t>(i)];
  static const Eigen::Matrix<double, 8, 8> basis = dct_basis();
  const Eigen::Index rows = frame.rows();
  const Eigen::Index cols = frame.cols();
  const Eigen::Index prow = (rows + 7) / 8 * 8;
  const Eigen::Index pcol = (cols + 7) / 8 * 8;
  Frame out = frame;
  for (std::size_t c = 0; c < frame.channels(); ++c) {
    Eigen::MatrixXd padded(prow, pcol);
    for (Eigen::Index r = 0; r < prow; ++r) {
      for (Eigen::Index x = 0; x < pcol; ++x) {
        padded(r, x) = frame.planes[c](std::min(r, rows - 1), std::min(x, cols - 1)) - 128.0;
      }
    }
    for (Eigen::Index br = 0; br < prow; br += 8) {
      for (Eigen::Index bc = 0; bc < pcol; bc += 8) {
        const Eigen::Matrix<double, 8, 8> block = padded.block<8, 8>(br, bc);
        Eigen::Matrix<double, 8, 8> coef = basis * block * basis.transpose();
        coef = ((coef.array() / q.array()).round() * q.array()).matrix();
        padded.block<8, 8>(br, bc) = basis.transpose() * coef * basis;
      }
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index x = 0; x < cols; ++x) out.planes[c](r, x) = clip_round(padded(r, x) + 128.0);
    }
  }
  return out;
}

}  // namespace blindloom
