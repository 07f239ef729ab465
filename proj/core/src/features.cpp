#include "hcap/features.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "hcap/error.hpp"

namespace hcap::features {

static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Cursor {
 public:
  Cursor(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) throw FormatError(source_ + ": truncated while reading " + what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const char* here() const { return bytes_.data() + pos_; }

 private:
  std::string_view bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_features(const diff::Tensor& matrix, Dtype dtype) {
  const auto& shape = matrix.shape();
  if (shape.size() > 2) throw DimensionError("feature files hold vectors or matrices, got " + diff::shape_str(shape));
  std::string out;
  const auto values = matrix.data();
  out.reserve(header_bytes(shape.size()) + values.size() * (dtype == Dtype::f32 ? 4 : 8));
  out.append("HCFT", 4);
  put<std::uint16_t>(out, kVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(dtype));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(shape.size()));
  for (auto d : shape) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw DimensionError("feature dimension exceeds u32");
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  for (double v : values) {
    if (dtype == Dtype::f32) {
      put<float>(out, static_cast<float>(v));
    } else {
      put<double>(out, v);
    }
  }
  return out;
}

void write_features(const std::filesystem::path& path, const diff::Tensor& matrix, Dtype dtype) {
  const auto bytes = encode_features(matrix, dtype);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw FormatError("write failed: " + path.string());
}

diff::Tensor decode_features(std::string_view bytes, const std::string& source) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "HCFT") throw FormatError(source + ": bad magic, expected HCFT");
  Cursor cur(bytes.substr(4), source);
  const auto version = cur.get<std::uint16_t>("version");
  if (version != kVersion) throw FormatError(source + ": unsupported version " + std::to_string(version));
  const auto dtype = cur.get<std::uint8_t>("dtype");
  if (dtype > 1) throw FormatError(source + ": unknown dtype " + std::to_string(dtype));
  const auto ndim = cur.get<std::uint16_t>("ndim");
  if (ndim == 0 || ndim > 2) throw FormatError(source + ": expected 1 or 2 dimensions, got " + std::to_string(ndim));
  diff::Shape shape;
  std::uint64_t count = 1;
  for (std::uint16_t i = 0; i < ndim; ++i) {
    const auto d = cur.get<std::uint32_t>("dims");
    if (d == 0) throw FormatError(source + ": zero-sized dimension");
    if (count > std::numeric_limits<std::uint64_t>::max() / 8 / d) throw FormatError(source + ": dimension overflow");
    count *= d;
    shape.push_back(d);
  }
  if (ndim == 1) shape.insert(shape.begin(), 1);
  const std::size_t width = dtype == 0 ? 4 : 8;
  if (cur.remaining() < count * width) {
    throw FormatError(source + ": truncated payload (" + std::to_string(cur.remaining()) + " of " +
                      std::to_string(count * width) + " bytes)");
  }
  if (cur.remaining() > count * width) throw FormatError(source + ": trailing bytes after payload");
  std::vector<double> values(count);
  const char* p = cur.here();
  for (std::size_t i = 0; i < count; ++i) {
    if (dtype == 0) {
      float f;
      std::memcpy(&f, p + i * 4, 4);
      values[i] = f;
    } else {
      std::memcpy(&values[i], p + i * 8, 8);
    }
  }
  return diff::Tensor::from(std::move(shape), std::move(values));
}

diff::Tensor read_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot read " + path.string());
  std::ostringstream os;
  os << is.rdbuf();
  return decode_features(os.str(), path.string());
}

}  // namespace hcap::features
