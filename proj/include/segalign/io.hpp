#pragma once

// Plain-text corpus files.
//
//   transcripts:    video_id<TAB>label label label ...
//   sparse labels:  video_id<TAB>frame<TAB>label
//   ground truth:   video_id<TAB>label<TAB>start<TAB>end   (inclusive frames)
//
// Blank lines and lines starting with '#' are ignored.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "segalign/core.hpp"

namespace segalign {

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

inline bool skip_line(const std::string& s) {
  return s.find_first_not_of(" \t") == std::string::npos || s[0] == '#';
}

inline int parse_int(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw Error(where + ": expected an integer, got '" + s + "'");
  }
  if (used != s.size()) throw Error(where + ": expected an integer, got '" + s + "'");
  return v;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace detail

inline std::vector<Transcript> read_transcripts(std::istream& in, LabelVocabulary& vocab) {
  std::vector<Transcript> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (detail::skip_line(line)) continue;
    const auto tab = line.find('\t');
    const std::string where = "transcripts line " + std::to_string(lineno);
    if (tab == std::string::npos) throw Error(where + ": missing TAB after video id");
    Transcript t{line.substr(0, tab), {}};
    for (const auto& w : detail::split_ws(line.substr(tab + 1))) t.actions.push_back(vocab.add(w));
    if (t.video_id.empty()) throw Error(where + ": empty video id");
    if (t.actions.empty()) throw Error(where + ": empty transcript");
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<Transcript> read_transcripts(const std::filesystem::path& path,
                                                LabelVocabulary& vocab) {
  auto in = detail::open_in(path);
  return read_transcripts(in, vocab);
}

inline void write_transcripts(std::ostream& out, const std::vector<Transcript>& ts,
                              const LabelVocabulary& vocab) {
  for (const auto& t : ts) {
    out << t.video_id << '\t';
    for (std::size_t i = 0; i < t.actions.size(); ++i)
      out << (i ? " " : "") << vocab.name(t.actions[i]);
    out << '\n';
  }
}

// Labels per video, sorted by frame. Unknown labels are added to `vocab`.
inline std::map<std::string, std::vector<SparseLabel>> read_sparse_labels(std::istream& in,
                                                                          LabelVocabulary& vocab) {
  std::map<std::string, std::vector<SparseLabel>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (detail::skip_line(line)) continue;
    const std::string where = "sparse labels line " + std::to_string(lineno);
    auto cols = detail::split(line, '\t');
    if (cols.size() != 3) throw Error(where + ": expected 3 TAB-separated columns");
    const int frame = detail::parse_int(cols[1], where);
    if (frame < 0) throw Error(where + ": negative frame index");
    out[cols[0]].push_back({frame, vocab.add(cols[2])});
  }
  for (auto& [vid, labels] : out) {
    std::sort(labels.begin(), labels.end(),
              [](const SparseLabel& a, const SparseLabel& b) { return a.frame < b.frame; });
    try {
      require_sorted(labels);
    } catch (const Error&) {
      throw Error("sparse labels for '" + vid + "' contain a duplicated frame");
    }
  }
  return out;
}

inline std::map<std::string, std::vector<SparseLabel>> read_sparse_labels(
    const std::filesystem::path& path, LabelVocabulary& vocab) {
  auto in = detail::open_in(path);
  return read_sparse_labels(in, vocab);
}

inline void write_sparse_labels(std::ostream& out,
                                const std::map<std::string, std::vector<SparseLabel>>& labels,
                                const LabelVocabulary& vocab) {
  for (const auto& [vid, ls] : labels)
    for (const auto& l : ls) out << vid << '\t' << l.frame << '\t' << vocab.name(l.action) << '\n';
}

inline std::map<std::string, Segmentation> read_segmentations(std::istream& in,
                                                              LabelVocabulary& vocab) {
  std::map<std::string, Segmentation> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::strip_cr(line);
    if (detail::skip_line(line)) continue;
    const std::string where = "ground truth line " + std::to_string(lineno);
    auto cols = detail::split(line, '\t');
    if (cols.size() != 4) throw Error(where + ": expected 4 TAB-separated columns");
    Segment s{vocab.add(cols[1]), detail::parse_int(cols[2], where),
              detail::parse_int(cols[3], where)};
    auto& seg = out[cols[0]];
    seg.video_id = cols[0];
    seg.segments.push_back(s);
  }
  for (auto& [vid, seg] : out) {
    std::sort(seg.segments.begin(), seg.segments.end(),
              [](const Segment& a, const Segment& b) { return a.start < b.start; });
    require_tiling(seg);
  }
  return out;
}

inline std::map<std::string, Segmentation> read_segmentations(const std::filesystem::path& path,
                                                              LabelVocabulary& vocab) {
  auto in = detail::open_in(path);
  return read_segmentations(in, vocab);
}

inline void write_segmentations(std::ostream& out, const std::vector<Segmentation>& segs,
                                const LabelVocabulary& vocab) {
  for (const auto& seg : segs)
    for (const auto& s : seg.segments)
      out << seg.video_id << '\t' << vocab.name(s.action) << '\t' << s.start << '\t' << s.end
          << '\n';
}

// Writes to a sibling temp file and renames it over `path`.
template <typename Writer>
void write_atomically(const std::filesystem::path& path, Writer&& writer,
                      std::ios::openmode mode = std::ios::out) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, mode | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    writer(out);
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

inline void write_text_atomically(const std::filesystem::path& path, const std::string& text) {
  write_atomically(path, [&](std::ostream& o) { o << text; });
}

}  // namespace segalign
