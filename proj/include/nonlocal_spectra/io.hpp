#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "nonlocal_spectra/error.hpp"

namespace nls::io {

/// 17 significant digits, '.' separator, independent of the global locale.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) fail(ErrorCode::SchemaMismatch, "not a number: '" + s + "'");
  return v;
}

/// Writes `content` to `path` through a sibling temporary file and a rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) fail(ErrorCode::ArtifactWriteFailure, "cannot create " + path.parent_path().string() + ": " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::ArtifactWriteFailure, "cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) fail(ErrorCode::ArtifactWriteFailure, "write to " + tmp.string() + " failed");
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::ArtifactWriteFailure, "cannot rename onto " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ConfigParse, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header = {}) : header_(std::move(header)) {}

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }

  void add_row(std::vector<std::string> row) {
    if (row.size() != header_.size()) fail(ErrorCode::Internal, "CSV row width differs from header");
    rows_.push_back(std::move(row));
  }

  void add_row(const std::vector<double>& values) {
    std::vector<std::string> row;
    row.reserve(values.size());
    for (double v : values) row.push_back(format_double(v));
    add_row(std::move(row));
  }

  /// Index of a named column, or -1.
  long column(const std::string& name) const {
    auto it = std::find(header_.begin(), header_.end(), name);
    return it == header_.end() ? -1 : static_cast<long>(it - header_.begin());
  }

  std::vector<double> numeric_column(std::size_t j) const {
    std::vector<double> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(parse_double(r.at(j)));
    return out;
  }

  std::string str() const {
    std::string s;
    auto line = [&s](const std::vector<std::string>& cells) {
      for (std::size_t j = 0; j < cells.size(); ++j) {
        if (j) s += ',';
        s += cells[j];
      }
      s += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return s;
  }

  void write(const std::filesystem::path& path) const { write_atomic(path, str()); }

  static CsvTable parse(const std::string& text) {
    std::vector<std::vector<std::string>> lines;
    std::istringstream in(text);
    std::string l;
    while (std::getline(in, l)) {
      if (!l.empty() && l.back() == '\r') l.pop_back();
      if (l.empty()) continue;
      std::vector<std::string> cells;
      std::size_t start = 0;
      for (;;) {
        const std::size_t comma = l.find(',', start);
        cells.push_back(l.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      lines.push_back(std::move(cells));
    }
    if (lines.empty()) fail(ErrorCode::SchemaMismatch, "CSV has no header");
    CsvTable t(lines.front());
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].size() != t.header_.size())
        fail(ErrorCode::SchemaMismatch, "CSV line " + std::to_string(i + 1) + " has " + std::to_string(lines[i].size()) +
                                            " cells, header has " + std::to_string(t.header_.size()));
      t.rows_.push_back(std::move(lines[i]));
    }
    return t;
  }

  static CsvTable load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::SchemaMismatch, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

// ---------------------------------------------------------------------------
// SVG plots

enum class PlotKind { Line, Profile };

struct Series {
  std::vector<double> x, y;
  std::string xlabel, ylabel;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
  return std::string(buf, r.ptr);
}

inline std::string tick(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 4);
  return std::string(buf, r.ptr);
}

}  // namespace detail

/// Extracts the plotted series from a CSV according to the plot kind.
///
/// line: first column against second column, in file order.
/// profile: column x (or x1) against psi; for 2D tables the row set is the
/// slice with the smallest |x2|, sorted by x.
inline Series extract_series(const CsvTable& t, PlotKind kind) {
  if (t.size() == 0) fail(ErrorCode::SchemaMismatch, "CSV has no data rows");
  Series s;
  if (kind == PlotKind::Line) {
    if (t.header().size() < 2) fail(ErrorCode::SchemaMismatch, "line plot needs at least two columns");
    s.x = t.numeric_column(0);
    s.y = t.numeric_column(1);
    s.xlabel = t.header()[0];
    s.ylabel = t.header()[1];
    return s;
  }
  long cx = t.column("x");
  if (cx < 0) cx = t.column("x1");
  const long cy = t.column("psi");
  if (cx < 0 || cy < 0) fail(ErrorCode::SchemaMismatch, "profile plot needs columns x (or x1) and psi");
  std::vector<double> x = t.numeric_column(static_cast<std::size_t>(cx));
  std::vector<double> y = t.numeric_column(static_cast<std::size_t>(cy));
  std::vector<std::size_t> keep(x.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
  if (const long c2 = t.column("x2"); c2 >= 0) {
    const std::vector<double> x2 = t.numeric_column(static_cast<std::size_t>(c2));
    double best = x2.front();
    for (double v : x2)
      if (std::abs(v) < std::abs(best)) best = v;
    keep.clear();
    for (std::size_t i = 0; i < x2.size(); ++i)
      if (x2[i] == best) keep.push_back(i);
  }
  std::stable_sort(keep.begin(), keep.end(), [&x](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  for (std::size_t i : keep) {
    s.x.push_back(x[i]);
    s.y.push_back(y[i]);
  }
  s.xlabel = t.header()[static_cast<std::size_t>(cx)];
  s.ylabel = "psi";
  return s;
}

/// Self-contained SVG with axes, tick labels and one polyline.
inline std::string render_svg(const Series& s, const std::string& title) {
  for (std::size_t i = 0; i < s.x.size(); ++i)
    if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
      fail(ErrorCode::SchemaMismatch, "non-finite value in row " + std::to_string(i + 1));
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  auto [xmin_it, xmax_it] = std::minmax_element(s.x.begin(), s.x.end());
  auto [ymin_it, ymax_it] = std::minmax_element(s.y.begin(), s.y.end());
  double x0 = *xmin_it, x1 = *xmax_it, y0 = *ymin_it, y1 = *ymax_it;
  if (x1 - x0 <= 0) { x0 -= 0.5; x1 += 0.5; }
  if (y1 - y0 <= 0) { y0 -= 0.5; y1 += 0.5; }
  auto px = [&](double v) { return ml + (v - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (v - y0) / (y1 - y0) * (H - mt - mb); };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"420\" viewBox=\"0 0 640 420\">\n";
  o += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"420\" fill=\"white\"/>\n";
  o += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" +
       detail::svg_escape(title) + "</text>\n";
  o += "<line x1=\"" + detail::num(ml) + "\" y1=\"" + detail::num(H - mb) + "\" x2=\"" + detail::num(W - mr) +
       "\" y2=\"" + detail::num(H - mb) + "\" stroke=\"black\"/>\n";
  o += "<line x1=\"" + detail::num(ml) + "\" y1=\"" + detail::num(mt) + "\" x2=\"" + detail::num(ml) + "\" y2=\"" +
       detail::num(H - mb) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o += "<text x=\"" + detail::num(px(xv)) + "\" y=\"" + detail::num(H - mb + 18) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + detail::tick(xv) + "</text>\n";
    o += "<text x=\"" + detail::num(ml - 6) + "\" y=\"" + detail::num(py(yv) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + detail::tick(yv) + "</text>\n";
  }
  o += "<text x=\"" + detail::num((ml + W - mr) / 2) + "\" y=\"" + detail::num(H - 10) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + detail::svg_escape(s.xlabel) +
       "</text>\n";
  o += "<text x=\"16\" y=\"" + detail::num((mt + H - mb) / 2) + "\" transform=\"rotate(-90 16 " +
       detail::num((mt + H - mb) / 2) + ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
       detail::svg_escape(s.ylabel) + "</text>\n";
  o += "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    if (i) o += ' ';
    o += detail::num(px(s.x[i])) + "," + detail::num(py(s.y[i]));
  }
  o += "\"/>\n</svg>\n";
  return o;
}

/// Reads a CSV, checks its schema against `kind` and writes the SVG atomically.
inline void plot(const std::filesystem::path& csv_in, PlotKind kind, const std::filesystem::path& svg_out) {
  const CsvTable t = CsvTable::load(csv_in);
  const Series s = extract_series(t, kind);
  write_atomic(svg_out, render_svg(s, csv_in.filename().string()));
}

}  // namespace nls::io
