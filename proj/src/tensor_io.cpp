#include "detkit/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "detkit/errors.hpp"
#include "detkit/json_io.hpp"

namespace detkit {

namespace {

constexpr std::array<char, 4> kMagic{'D', 'K', 'F', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw InputError("feature map: truncated binary data");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void write_feature_map(std::ostream& out, const FeatureMap& map) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, map.channels());
  put_le<std::uint64_t>(out, map.height());
  put_le<std::uint64_t>(out, map.width());
  for (double v : map.data()) put_le<double>(out, v);
}

FeatureMap read_feature_map_binary(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw InputError("feature map: bad magic, expected DKFM");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kVersion) {
    throw InputError("feature map: unsupported version " + std::to_string(version));
  }
  const auto c = get_le<std::uint64_t>(in);
  const auto h = get_le<std::uint64_t>(in);
  const auto w = get_le<std::uint64_t>(in);
  if (c == 0 || h == 0 || w == 0 || c > kMaxElements / h / w) {
    throw InputError("feature map: invalid dimensions in header");
  }
  std::vector<double> data(c * h * w);
  for (double& v : data) v = get_le<double>(in);
  FeatureMap map(c, h, w, std::move(data));
  if (!map.all_finite()) throw InputError("feature map: non-finite value");
  return map;
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open feature map file: " + path.string());
  if (in.peek() == kMagic[0]) return read_feature_map_binary(in);
  return feature_map_from_json(read_json(in, path.string()));
}

void save_feature_map(const std::filesystem::path& path, const FeatureMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write feature map file: " + path.string());
  write_feature_map(out, map);
}

}  // namespace detkit
