#include "blindloom/frame_io.hpp"

#include "blindloom/binary_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

namespace blindloom {

namespace fs = std::filesystem;

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& is) {
  std::string tok;
  int ch = 0;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

long parse_header_int(std::istream& is, const fs::path& path, const char* field) {
  const std::string tok = next_token(is);
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad " + field + " '" + tok + "'");
  }
}

}  // namespace

unsigned char to_byte(double value) {
  const double clamped = std::clamp(value, 0.0, 255.0);
  return static_cast<unsigned char>(std::round(clamped));
}

Frame read_pnm(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  const std::string magic = next_token(is);
  std::size_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw IoError(path.string() + ": unsupported format '" + magic + "' (expected P5 or P6)");
  }
  const long width = parse_header_int(is, path, "width");
  const long height = parse_header_int(is, path, "height");
  const long maxval = parse_header_int(is, path, "maxval");
  if (maxval > 255) throw IoError(path.string() + ": 16-bit PNM is not supported");
  // next_token consumed exactly one whitespace byte after maxval.
  const std::size_t count = static_cast<std::size_t>(width * height) * channels;
  std::vector<unsigned char> bytes(count);
  if (!is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count))) {
    throw IoError(path.string() + ": truncated pixel data");
  }
  const double scale = maxval == 255 ? 1.0 : 255.0 / static_cast<double>(maxval);
  Frame frame(channels, height, width);
  for (long r = 0; r < height; ++r) {
    for (long x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        frame.planes[c](r, x) = scale * bytes[(static_cast<std::size_t>(r * width + x)) * channels + c];
      }
    }
  }
  return frame;
}

void write_pnm(const fs::path& path, const Frame& frame) {
  const std::size_t channels = frame.channels();
  if (channels != 1 && channels != 3) {
    throw IoError("write_pnm: only 1- or 3-channel frames can be written, got " + std::to_string(channels));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << (channels == 1 ? "P5" : "P6") << "\n" << frame.cols() << " " << frame.rows() << "\n255\n";
  std::vector<unsigned char> bytes(static_cast<std::size_t>(frame.rows() * frame.cols()) * channels);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < frame.rows(); ++r) {
    for (Eigen::Index x = 0; x < frame.cols(); ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = frame.planes[c](r, x);
        if (!std::isfinite(v)) throw IoError("write_pnm: non-finite pixel value");
        bytes[k++] = to_byte(v);
      }
    }
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

std::string frame_filename(std::size_t index, std::size_t channels) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "frame_%05zu.%s", index, channels == 3 ? "ppm" : "pgm");
  return buf;
}

FrameSequence load_sequence(const fs::path& directory, const std::string& pattern) {
  if (!fs::is_directory(directory)) throw IoError("not a directory: " + directory.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    const std::string ext = entry.path().extension().string();
    if (ext != ".pgm" && ext != ".ppm") continue;
    if (!pattern.empty() && name.find(pattern) == std::string::npos) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.size() < 2) {
    throw IoError(directory.string() + ": need at least 2 frames, found " + std::to_string(files.size()));
  }
  FrameSequence seq;
  for (const auto& f : files) {
    Frame frame = read_pnm(f);
    if (!seq.empty() && !frame.same_shape(seq.frames.front())) {
      throw IoError(f.string() + ": frame dimensions differ from " + files.front().string());
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

void save_sequence(const FrameSequence& seq, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (!fs::is_directory(directory)) throw IoError("cannot create directory " + directory.string());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    write_pnm(directory / frame_filename(i, seq[i].channels()), seq[i]);
  }
}

Image crop(const Image& image, const CropWindow& w) {
  if (!w.fits(image.rows(), image.cols())) {
    throw std::out_of_range("crop window (" + std::to_string(w.top) + "," + std::to_string(w.left) + ") " +
                            std::to_string(w.height) + "x" + std::to_string(w.width) + " exceeds " +
                            std::to_string(image.rows()) + "x" + std::to_string(image.cols()));
  }
  return image.block(w.top, w.left, w.height, w.width);
}

Frame crop(const Frame& frame, const CropWindow& w) {
  Frame out;
  out.planes.reserve(frame.channels());
  for (const auto& p : frame.planes) out.planes.push_back(crop(p, w));
  return out;
}

FrameSequence crop(const FrameSequence& seq, const CropWindow& w) {
  FrameSequence out;
  out.frame_rate = seq.frame_rate;
  for (const auto& f : seq.frames) out.frames.push_back(crop(f, w));
  return out;
}

FlowField crop(const FlowField& flow, const CropWindow& w) {
  return FlowField(crop(flow.u, w), crop(flow.v, w), flow.direction);
}

// ---------------------------------------------------------------------------

namespace {
constexpr char kTensorMagic[5] = {'B', 'L', 'T', 'T', '1'};
}

void write_tensor(const fs::path& path, const Tensor4<float>& tensor) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kTensorMagic, sizeof(kTensorMagic));
  for (std::size_t e : tensor.shape()) detail::put_u32(os, static_cast<std::uint32_t>(e));
  for (Eigen::Index i = 0; i < tensor.data().size(); ++i) detail::put_f32(os, tensor.data()[i]);
  if (!os) throw IoError("write failed: " + path.string());
}

Tensor4<float> read_tensor(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[5] = {};
  if (!is.read(magic, sizeof(magic)) || !std::equal(magic, magic + 5, kTensorMagic)) {
    throw IoError(path.string() + ": not a BLTT1 tensor file");
  }
  Shape4 shape{};
  for (auto& e : shape) {
    std::uint32_t v = 0;
    if (!detail::get_u32(is, v)) throw IoError(path.string() + ": truncated header");
    e = v;
  }
  Tensor4<float> t(shape);
  for (Eigen::Index i = 0; i < t.data().size(); ++i) {
    if (!detail::get_f32(is, t.data()[i])) throw IoError(path.string() + ": truncated payload");
  }
  return t;
}

Tensor4<float> to_tensor(const FlowField& flow) {
  Tensor4<float> t({1, 2, static_cast<std::size_t>(flow.rows()), static_cast<std::size_t>(flow.cols())});
  auto s = t.sample(0);
  s.row(0) = Eigen::Map<const Eigen::RowVectorXd>(flow.u.data(), flow.u.size()).cast<float>();
  s.row(1) = Eigen::Map<const Eigen::RowVectorXd>(flow.v.data(), flow.v.size()).cast<float>();
  return t;
}

FlowField flow_from_tensor(const Tensor4<float>& t, FlowDirection dir) {
  if (t.batch() != 1 || t.channels() != 2) throw ShapeError("flow tensor must be (1,2,H,W), got " + shape_string(t.shape()));
  const auto rows = static_cast<Eigen::Index>(t.rows());
  const auto cols = static_cast<Eigen::Index>(t.cols());
  FlowField f(rows, cols, dir);
  const auto s = t.sample(0);
  Eigen::Map<Eigen::RowVectorXd>(f.u.data(), f.u.size()) = s.row(0).cast<double>();
  Eigen::Map<Eigen::RowVectorXd>(f.v.data(), f.v.size()) = s.row(1).cast<double>();
  return f;
}

Tensor4<float> to_tensor(const Image& image) {
  Tensor4<float> t({1, 1, static_cast<std::size_t>(image.rows()), static_cast<std::size_t>(image.cols())});
  t.sample(0).row(0) = Eigen::Map<const Eigen::RowVectorXd>(image.data(), image.size()).cast<float>();
  return t;
}

Image image_from_tensor(const Tensor4<float>& t) {
  if (t.batch() != 1 || t.channels() != 1) throw ShapeError("map tensor must be (1,1,H,W), got " + shape_string(t.shape()));
  Image img(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
  Eigen::Map<Eigen::RowVectorXd>(img.data(), img.size()) = t.sample(0).row(0).cast<double>();
  return img;
}

Tensor4<float> to_tensor(const Frame& frame) {
  Tensor4<float> t({1, frame.channels(), static_cast<std::size_t>(frame.rows()), static_cast<std::size_t>(frame.cols())});
  for (std::size_t c = 0; c < frame.channels(); ++c) {
    t.sample(0).row(static_cast<Eigen::Index>(c)) =
        Eigen::Map<const Eigen::RowVectorXd>(frame.planes[c].data(), frame.planes[c].size()).cast<float>();
  }
  return t;
}

}  // namespace blindloom
