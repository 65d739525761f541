#include "blindloom/checkpoint.hpp"

#include "blindloom/binary_io.hpp"
#include "blindloom/frame_io.hpp"

#include <fstream>

namespace blindloom {

namespace {
constexpr char kCheckpointMagic[5] = {'B', 'L', 'T', 'C', '1'};
}

void write_checkpoint(const std::filesystem::path& path, const ParamSet<float>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  // std::map iterates in sorted name order.
  for (const auto& [name, p] : params.entries) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    for (std::size_t e : p.value.shape()) detail::put_u32(os, static_cast<std::uint32_t>(e));
    for (Eigen::Index i = 0; i < p.value.data().size(); ++i) detail::put_f32(os, p.value.data()[i]);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

ParamSet<float> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[5] = {};
  if (!is.read(magic, sizeof(magic)) || !std::equal(magic, magic + 5, kCheckpointMagic)) {
    throw IoError(path.string() + ": not a BLTC1 checkpoint");
  }
  ParamSet<float> params;
  std::uint32_t name_len = 0;
  while (detail::get_u32(is, name_len)) {
    if (name_len == 0 || name_len > 4096) throw IoError(path.string() + ": corrupt parameter name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw IoError(path.string() + ": truncated parameter name");
    Shape4 shape{};
    for (auto& e : shape) {
      std::uint32_t v = 0;
      if (!detail::get_u32(is, v)) throw IoError(path.string() + ": truncated extents of '" + name + "'");
      e = v;
    }
    Tensor4<float> value(shape);
    for (Eigen::Index i = 0; i < value.data().size(); ++i) {
      if (!detail::get_f32(is, value.data()[i])) throw IoError(path.string() + ": truncated data of '" + name + "'");
    }
    params.add(name, std::move(value));
  }
  return params;
}

}  // namespace blindloom
