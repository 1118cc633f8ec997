#pragma once

#include "dapointr/geometry.hpp"

#include <filesystem>
#include <string>

namespace dapointr::io {

enum class CloudFormat { xyz, ply };

/// `.ply` maps to binary little-endian PLY; `.xyz` / `.txt` / `.pts` to ASCII XYZ.
CloudFormat format_for(const std::filesystem::path& path);

/// Reads ASCII XYZ (one "x y z" per line, '#' comments) or PLY
/// (binary_little_endian or ascii; scalar vertex properties x, y, z).
/// Throws ParseError carrying line/byte offset on malformed input.
PointCloud read_cloud(const std::filesystem::path& path);

/// Writes float32 coordinates, so a round trip is exact at float32 precision.
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path);

PointCloud parse_xyz(const std::string& text, const std::string& source = "<memory>");
PointCloud parse_ply(const std::string& bytes, const std::string& source = "<memory>");
std::string serialize_ply(const PointCloud& cloud);
std::string serialize_xyz(const PointCloud& cloud);

}  // namespace dapointr::io
