#pragma once

// Binary feature files and the feature directory manifest.
//
// File layout (little-endian):
//   8 bytes   magic "SEGFEAT1"
//   u32       T (frames)
//   u32       D (dimension)
//   T*D f32   row-major values
//
// A feature directory holds `manifest.tsv` with one line per video:
//   video_id<TAB>relative_path<TAB>T<TAB>D

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "segalign/core.hpp"
#include "segalign/io.hpp"

namespace segalign {

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureSequence {
  std::string video_id;
  FeatureMatrix values;  // T x D

  int frames() const { return static_cast<int>(values.rows()); }
  int dim() const { return static_cast<int>(values.cols()); }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

inline constexpr std::array<char, 8> kFeatureMagic{'S', 'E', 'G', 'F', 'E', 'A', 'T', '1'};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline std::uint32_t get_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void validate(const FeatureSequence& x) {
  if (x.values.rows() < 1 || x.values.cols() < 1)
    throw Error("feature sequence '" + x.video_id + "' must have T >= 1 and D >= 1");
  if (!x.values.allFinite())
    throw Error("feature sequence '" + x.video_id + "' contains non-finite values");
}

inline void write_features(std::ostream& out, const FeatureSequence& x) {
  validate(x);
  out.write(kFeatureMagic.data(), kFeatureMagic.size());
  detail::put_u32(out, static_cast<std::uint32_t>(x.values.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(x.values.cols()));
  for (Eigen::Index i = 0; i < x.values.size(); ++i) {
    std::uint32_t bits;
    const float v = x.values.data()[i];
    std::memcpy(&bits, &v, sizeof bits);
    detail::put_u32(out, bits);
  }
}

inline void save_features(const std::filesystem::path& path, const FeatureSequence& x) {
  write_atomically(path, [&](std::ostream& o) { write_features(o, x); }, std::ios::binary);
}

inline FeatureSequence read_features(std::istream& in, std::string video_id) {
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  const std::uint64_t header = kFeatureMagic.size() + 8;
  if (buf.size() < kFeatureMagic.size() ||
      std::memcmp(buf.data(), kFeatureMagic.data(), kFeatureMagic.size()) != 0)
    throw ParseError("bad magic in feature file", 0);
  if (buf.size() < header) throw ParseError("truncated feature header", buf.size());
  const std::uint32_t T = detail::get_u32(buf.data() + 8);
  const std::uint32_t D = detail::get_u32(buf.data() + 12);
  if (T == 0 || D == 0) throw ParseError("feature header declares an empty matrix", 8);
  const std::uint64_t need = header + 4ULL * T * D;
  if (buf.size() < need) throw ParseError("truncated feature data", buf.size());
  if (buf.size() > need) throw ParseError("trailing bytes after feature data", need);
  FeatureSequence x{std::move(video_id), FeatureMatrix(T, D)};
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(T) * D; ++i) {
    const std::uint32_t bits = detail::get_u32(buf.data() + header + 4 * i);
    float v;
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) throw ParseError("non-finite feature value", header + 4 * i);
    x.values.data()[i] = v;
  }
  return x;
}

inline FeatureSequence load_features(const std::filesystem::path& path,
                                     std::string video_id = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file '" + path.string() + "'");
  if (video_id.empty()) video_id = path.stem().string();
  try {
    return read_features(in, std::move(video_id));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

struct ManifestEntry {
  std::string video_id;
  std::string path;  // relative to the manifest directory
  int frames = 0;
  int dim = 0;
};

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir) {
  auto in = detail::open_in(dir / "manifest.tsv");
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (detail::skip_line(line)) continue;
    const std::string where = "manifest line " + std::to_string(lineno);
    auto cols = detail::split(line, '\t');
    if (cols.size() != 4) throw Error(where + ": expected 4 TAB-separated columns");
    out.push_back({cols[0], cols[1], detail::parse_int(cols[2], where),
                   detail::parse_int(cols[3], where)});
  }
  return out;
}

// Loads every video listed in `dir/manifest.tsv`, in manifest order.
inline std::vector<FeatureSequence> load_feature_dir(const std::filesystem::path& dir) {
  std::vector<FeatureSequence> out;
  for (const auto& e : read_manifest(dir)) {
    auto x = load_features(dir / e.path, e.video_id);
    if (x.frames() != e.frames || x.dim() != e.dim)
      throw Error("feature file for '" + e.video_id + "' is " + std::to_string(x.frames()) + "x" +
                  std::to_string(x.dim()) + " but the manifest says " + std::to_string(e.frames) +
                  "x" + std::to_string(e.dim));
    out.push_back(std::move(x));
  }
  return out;
}

inline void save_feature_dir(const std::filesystem::path& dir,
                             const std::vector<FeatureSequence>& seqs) {
  std::filesystem::create_directories(dir);
  std::string manifest;
  for (const auto& x : seqs) {
    const std::string file = x.video_id + ".feat";
    save_features(dir / file, x);
    manifest += x.video_id + "\t" + file + "\t" + std::to_string(x.frames()) + "\t" +
                std::to_string(x.dim()) + "\n";
  }
  write_text_atomically(dir / "manifest.tsv", manifest);
}

}  // namespace segalign
