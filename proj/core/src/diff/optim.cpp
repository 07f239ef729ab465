#include "hcap/diff/optim.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hcap/error.hpp"

namespace hcap::diff {

void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].size()) {
      throw DimensionError("adam_step: state size mismatch for parameter " + std::to_string(i));
    }
    if (checked() && params[i].has_grad()) detail::check_finite(params[i].grad(), "adam_step gradient");
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) continue;  // never reached by backward()
    auto g = params[i].grad();
    auto x = params[i].mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < x.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      x[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double grad_norm(std::span<const Tensor> params) {
  double s = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) s += g * g;
  }
  return std::sqrt(s);
}

namespace {

constexpr char kMagic[4] = {'H', 'C', 'P', 'T'};
constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(const std::vector<char>& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw FormatError("checkpoint truncated at byte " + std::to_string(pos));
  T value;
  std::memcpy(&value, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os.write(kMagic, 4);
  put<std::uint16_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params.entries()) {
    if (name.size() > 0xFFFF) throw FormatError("parameter name too long: " + name);
    put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint16_t>(os, static_cast<std::uint16_t>(t.ndim()));
    for (auto d : t.shape()) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!os) throw FormatError("write failed for " + path.string());
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError(path.string() + ": bad magic, expected HCPT");
  std::size_t pos = 4;
  const auto version = take<std::uint16_t>(buf, pos);
  if (version != kVersion) throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto count = take<std::uint32_t>(buf, pos);
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = take<std::uint16_t>(buf, pos);
    if (pos + name_len > buf.size()) throw FormatError("checkpoint truncated in tensor name");
    std::string name(buf.data() + pos, name_len);
    pos += name_len;
    const auto ndim = take<std::uint16_t>(buf, pos);
    Shape shape;
    std::size_t n = 1;
    for (std::uint16_t d = 0; d < ndim; ++d) {
      const auto extent = take<std::uint32_t>(buf, pos);
      if (extent == 0) throw FormatError("checkpoint tensor '" + name + "' has a zero extent");
      shape.push_back(extent);
      if (n > (buf.size() / sizeof(double)) / extent + 1) throw FormatError("checkpoint tensor '" + name + "' dimension overflow");
      n *= extent;
    }
    if (pos + n * sizeof(double) > buf.size()) throw FormatError("checkpoint truncated in payload of '" + name + "'");
    std::vector<double> values(n);
    std::memcpy(values.data(), buf.data() + pos, n * sizeof(double));
    pos += n * sizeof(double);
    out.emplace_back(std::move(name), Tensor::from(std::move(shape), std::move(values)));
  }
  if (pos != buf.size()) throw FormatError(path.string() + ": trailing bytes after last tensor");
  return out;
}

}  // namespace hcap::diff
