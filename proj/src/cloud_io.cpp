#include "dapointr/cloud_io.hpp"

#include "dapointr/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace dapointr::io {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "PLY writer assumes little-endian host");

CloudFormat format_for(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ply") return CloudFormat::ply;
  if (ext == ".xyz" || ext == ".txt" || ext == ".pts") return CloudFormat::xyz;
  throw InvalidInput("unsupported point cloud extension: '" + ext + "'");
}

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

struct PlyProperty {
  std::string name;
  std::string type;
  std::size_t size = 0;
};

std::size_t scalar_size(const std::string& t) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

double read_scalar(const char* p, const std::string& t) {
  auto load = [p]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  if (t == "char" || t == "int8") return load(std::int8_t{});
  if (t == "uchar" || t == "uint8") return load(std::uint8_t{});
  if (t == "short" || t == "int16") return load(std::int16_t{});
  if (t == "ushort" || t == "uint16") return load(std::uint16_t{});
  if (t == "int" || t == "int32") return load(std::int32_t{});
  if (t == "uint" || t == "uint32") return load(std::uint32_t{});
  if (t == "float" || t == "float32") return load(float{});
  return load(double{});
}

}  // namespace

PointCloud parse_xyz(const std::string& text, const std::string& source) {
  std::vector<std::array<double, 3>> pts;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t line_start = pos;
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() < 3) {
      throw ParseError(source, line_no, line_start, "expected 3 coordinates, found " +
                                                        std::to_string(toks.size()));
    }
    std::array<double, 3> p{};
    for (int c = 0; c < 3; ++c) {
      if (!parse_double(toks[static_cast<std::size_t>(c)], p[static_cast<std::size_t>(c)])) {
        throw ParseError(source, line_no,
                         line_start + static_cast<std::size_t>(toks[static_cast<std::size_t>(c)].data() - line.data()),
                         "invalid number '" + std::string(toks[static_cast<std::size_t>(c)]) + "'");
      }
    }
    pts.push_back(p);
  }
  if (pts.empty()) throw ParseError(source, line_no, text.size(), "no points");
  Points out(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) << pts[i][0], pts[i][1], pts[i][2];
  }
  try {
    return PointCloud(std::move(out));
  } catch (const InvalidInput& e) {
    throw ParseError(source, 0, 0, e.what());
  }
}

PointCloud parse_ply(const std::string& bytes, const std::string& source) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) -> bool {
    if (pos >= bytes.size()) return false;
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string::npos) return false;
    line = std::string_view(bytes.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || line != "ply") throw ParseError(source, 1, 0, "missing 'ply' magic");

  enum class Enc { none, ascii, binary_le } enc = Enc::none;
  long long vertex_count = -1;
  bool in_vertex = false;
  bool vertex_seen = false;
  std::vector<PlyProperty> props;
  bool header_done = false;
  while (true) {
    const std::size_t line_start = pos;
    if (!next_line(line)) throw ParseError(source, line_no, pos, "truncated header");
    const auto toks = split_ws(line);
    if (toks.empty() || toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "end_header") {
      header_done = true;
      break;
    }
    if (toks[0] == "format") {
      if (toks.size() < 2) throw ParseError(source, line_no, line_start, "malformed format line");
      if (toks[1] == "ascii") enc = Enc::ascii;
      else if (toks[1] == "binary_little_endian") enc = Enc::binary_le;
      else throw ParseError(source, line_no, line_start, "unsupported format '" + std::string(toks[1]) + "'");
    } else if (toks[0] == "element") {
      if (toks.size() != 3) throw ParseError(source, line_no, line_start, "malformed element line");
      if (vertex_seen) {
        in_vertex = false;  // later elements are ignored
        continue;
      }
      if (toks[1] != "vertex") {
        throw ParseError(source, line_no, line_start, "element before 'vertex' is not supported");
      }
      double cnt = 0;
      if (!parse_double(toks[2], cnt) || cnt < 0 || cnt != static_cast<long long>(cnt)) {
        throw ParseError(source, line_no, line_start, "invalid vertex count");
      }
      vertex_count = static_cast<long long>(cnt);
      in_vertex = vertex_seen = true;
    } else if (toks[0] == "property") {
      if (!in_vertex) continue;
      if (toks.size() != 3) {
        throw ParseError(source, line_no, line_start, "list or malformed vertex property");
      }
      PlyProperty p{std::string(toks[2]), std::string(toks[1]), scalar_size(std::string(toks[1]))};
      if (p.size == 0) throw ParseError(source, line_no, line_start, "unknown property type '" + p.type + "'");
      props.push_back(p);
    } else {
      throw ParseError(source, line_no, line_start, "unexpected header keyword '" + std::string(toks[0]) + "'");
    }
  }
  if (!header_done || enc == Enc::none) throw ParseError(source, line_no, pos, "header lacks format");
  if (vertex_count <= 0) throw ParseError(source, line_no, pos, "no vertices declared");

  int ix = -1, iy = -1, iz = -1;
  std::size_t stride = 0;
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < props.size(); ++i) {
    offsets.push_back(stride);
    stride += props[i].size;
    if (props[i].name == "x") ix = static_cast<int>(i);
    if (props[i].name == "y") iy = static_cast<int>(i);
    if (props[i].name == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError(source, line_no, pos, "vertex lacks x/y/z properties");

  Points out(vertex_count, 3);
  const std::array<int, 3> cols{ix, iy, iz};
  if (enc == Enc::binary_le) {
    const std::size_t need = stride * static_cast<std::size_t>(vertex_count);
    if (bytes.size() - pos < need) {
      throw ParseError(source, 0, bytes.size(),
                       "truncated vertex data: need " + std::to_string(need) + " bytes, have " +
                           std::to_string(bytes.size() - pos));
    }
    for (long long v = 0; v < vertex_count; ++v) {
      const char* rec = bytes.data() + pos + static_cast<std::size_t>(v) * stride;
      for (int c = 0; c < 3; ++c) {
        const auto& pr = props[static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])];
        out(v, c) = read_scalar(rec + offsets[static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])], pr.type);
      }
    }
  } else {
    for (long long v = 0; v < vertex_count; ++v) {
      const std::size_t line_start = pos;
      std::string_view row;
      if (!next_line(row)) {
        // last line may lack a newline
        if (pos < bytes.size()) {
          row = std::string_view(bytes.data() + pos, bytes.size() - pos);
          pos = bytes.size();
          ++line_no;
        } else {
          throw ParseError(source, line_no, pos, "truncated vertex list");
        }
      }
      const auto toks = split_ws(row);
      if (toks.size() < props.size()) throw ParseError(source, line_no, line_start, "short vertex record");
      for (int c = 0; c < 3; ++c) {
        double val = 0;
        if (!parse_double(toks[static_cast<std::size_t>(cols[static_cast<std::size_t>(c)])], val)) {
          throw ParseError(source, line_no, line_start, "invalid number in vertex record");
        }
        out(v, c) = val;
      }
    }
  }
  if (!out.allFinite()) throw ParseError(source, 0, pos, "non-finite coordinate");
  return PointCloud(std::move(out));
}

std::string serialize_ply(const PointCloud& cloud) {
  std::ostringstream ss;
  ss << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size()
     << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  std::string out = ss.str();
  const std::size_t header = out.size();
  out.resize(header + cloud.size() * 12);
  char* dst = out.data() + header;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const auto f = static_cast<float>(cloud.points()(static_cast<Eigen::Index>(i), c));
      std::memcpy(dst, &f, 4);
      dst += 4;
    }
  }
  return out;
}

std::string serialize_xyz(const PointCloud& cloud) {
  std::ostringstream ss;
  ss << std::setprecision(9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.point(i);
    ss << static_cast<float>(p[0]) << ' ' << static_cast<float>(p[1]) << ' '
       << static_cast<float>(p[2]) << '\n';
  }
  return ss.str();
}

PointCloud read_cloud(const fs::path& path) {
  const auto fmt = format_for(path);
  const std::string data = slurp(path);
  return fmt == CloudFormat::ply ? parse_ply(data, path.string()) : parse_xyz(data, path.string());
}

void write_cloud(const PointCloud& cloud, const fs::path& path) {
  if (cloud.empty()) throw InvalidInput("write_cloud: empty point cloud");
  const auto fmt = format_for(path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open '" + path.string() + "' for writing");
  const std::string data = fmt == CloudFormat::ply ? serialize_ply(cloud) : serialize_xyz(cloud);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw InvalidInput("write failed: '" + path.string() + "'");
}

}  // namespace dapointr::io
