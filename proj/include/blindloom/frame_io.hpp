#pragma once

#include "blindloom/image.hpp"
#include "blindloom/tensor.hpp"

#include <filesystem>
#include <string>

namespace blindloom {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary PGM (P5) or PPM (P6), maxval <= 255.
Frame read_pnm(const std::filesystem::path& path);
// Values are clamped to [0, 255] and rounded half away from zero.
void write_pnm(const std::filesystem::path& path, const Frame& frame);

// Quantisation used by write_pnm.
unsigned char to_byte(double value);

// Loads every regular file in `directory` whose name contains `pattern`
// (empty = all .pgm/.ppm files), in lexicographic order.
FrameSequence load_sequence(const std::filesystem::path& directory, const std::string& pattern = "");
// Writes frame_00000.pgm (or .ppm), frame_00001... into `directory`.
void save_sequence(const FrameSequence& seq, const std::filesystem::path& directory);

std::string frame_filename(std::size_t index, std::size_t channels);

struct CropWindow {
  Eigen::Index top = 0;
  Eigen::Index left = 0;
  Eigen::Index height = 96;
  Eigen::Index width = 96;

  static CropWindow square(Eigen::Index top, Eigen::Index left, Eigen::Index size = 96) {
    return {top, left, size, size};
  }
  bool fits(Eigen::Index rows, Eigen::Index cols) const {
    return top >= 0 && left >= 0 && height >= 0 && width >= 0 && top + height <= rows && left + width <= cols;
  }
};

Image crop(const Image& image, const CropWindow& window);
Frame crop(const Frame& frame, const CropWindow& window);
FrameSequence crop(const FrameSequence& seq, const CropWindow& window);
FlowField crop(const FlowField& flow, const CropWindow& window);

// "BLTT1" container: magic, 4 little-endian u32 extents, row-major f32 payload.
void write_tensor(const std::filesystem::path& path, const Tensor4<float>& tensor);
Tensor4<float> read_tensor(const std::filesystem::path& path);

// Conversions between domain maps and the tensor container layout.
Tensor4<float> to_tensor(const FlowField& flow);                 // (1, 2, H, W)
FlowField flow_from_tensor(const Tensor4<float>& t, FlowDirection dir = FlowDirection::kForward);
Tensor4<float> to_tensor(const Image& image);                    // (1, 1, H, W)
Image image_from_tensor(const Tensor4<float>& t);
Tensor4<float> to_tensor(const Frame& frame);                    // (1, C, H, W)

}  // namespace blindloom
