// SPDX-License-Identifier: Apache-2.0
//
// Binary PGM (P5) / PPM (P6) export and import of arrays shaped (C, H, W) with
// C in {1, 3}, or (H, W) for a single channel. Values are clamped to [0, 1]
// and scaled to 0..255 on export; import maps bytes back with v / 255.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rrcl/array.hpp"

namespace rrcl {

std::vector<unsigned char> encode_pnm(const Array& image);
Array decode_pnm(const std::vector<unsigned char>& bytes);

void write_pnm(const std::filesystem::path& path, const Array& image);
Array read_pnm(const std::filesystem::path& path);

// ".pgm" for one channel, ".ppm" for three.
std::string pnm_extension(const Shape& shape);

// Plain-text key=value metadata, one pair per line, keys sorted.
void write_sidecar(const std::filesystem::path& path,
                   const std::map<std::string, std::string>& fields);
std::map<std::string, std::string> read_sidecar(const std::filesystem::path& path);

}  // namespace rrcl
