#pragma once

#include <filesystem>
#include <iosfwd>

#include "detkit/tensor.hpp"

namespace detkit {

// Binary feature-map file:
//   bytes 0..3   magic "DKFM"
//   bytes 4..7   uint32 format version (1)
//   then uint64 channels, height, width
//   then channels*height*width float64 values, channel-major, row-major.
// All integers and floats little-endian.

void write_feature_map(std::ostream& out, const FeatureMap& map);
FeatureMap read_feature_map_binary(std::istream& in);

/// Reads either the binary layout above or the JSON object
/// {"channels", "height", "width", "data"}; the format is sniffed from the
/// first bytes.
FeatureMap load_feature_map(const std::filesystem::path& path);
void save_feature_map(const std::filesystem::path& path, const FeatureMap& map);

}  // namespace detkit
