#pragma once

// File ingestion: CSV, LIBSVM sparse text, distance/Gram matrices (CSV or
// little-endian binary). Every reader accepts gzip input when the path ends
// in ".gz".

#include <zlib.h>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "comprf/dataset.hpp"
#include "comprf/error.hpp"
#include "comprf/matrix.hpp"

namespace comprf {

/// Label column selected by zero-based index (negative counts from the end)
/// or by header name.
using LabelColumn = std::variant<long, std::string>;

namespace io_detail {

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

/// Whole file contents, transparently gunzipped for ".gz" paths.
inline std::string read_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("file not found: " + path);
  if (ends_with(path, ".gz")) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open " + path);
    std::string out;
    char buf[1 << 16];
    int got = 0;
    while ((got = gzread(f, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(got));
    const bool failed = got < 0;
    gzclose(f);
    if (failed) throw DataError("corrupt gzip stream in " + path);
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<long> parse_long(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

/// Splits one CSV record. Supports double-quoted cells with "" escapes but
/// not embedded newlines.
inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

inline bool blank(std::string_view line) { return trim(line).empty(); }

/// Turns raw label strings into responses. Classification labels that are all
/// non-negative integers keep their values as codes; anything else is coded
/// densely in first-appearance order.
inline void assign_responses(Dataset& data, const std::vector<std::string>& raw, TaskKind task,
                             const std::string& path, const std::vector<std::size_t>& lines) {
  if (task == TaskKind::regression) {
    std::vector<double> targets(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      auto v = parse_double(raw[i]);
      if (!v) {
        throw DataError(path + ": line " + std::to_string(lines[i]) + ": target '" + raw[i] +
                        "' is not a number");
      }
      targets[i] = *v;
    }
    data.targets = std::move(targets);
    return;
  }
  std::vector<ClassLabel> codes(raw.size());
  bool integral = true;
  for (std::size_t i = 0; i < raw.size() && integral; ++i) {
    auto v = parse_long(raw[i]);
    if (!v || *v < 0 || *v >= static_cast<long>(kMaxClasses)) {
      integral = false;
    } else {
      codes[i] = static_cast<ClassLabel>(*v);
    }
  }
  if (!integral) {
    std::map<std::string, ClassLabel> index;
    data.class_names.clear();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      std::string key(trim(raw[i]));
      auto [it, inserted] = index.emplace(key, static_cast<ClassLabel>(data.class_names.size()));
      if (inserted) {
        if (data.class_names.size() >= kMaxClasses) throw DataError(path + ": too many classes");
        data.class_names.push_back(key);
      }
      codes[i] = it->second;
    }
    data.class_count = static_cast<std::uint32_t>(data.class_names.size());
  }
  data.labels = std::move(codes);
}

}  // namespace io_detail

struct CsvOptions {
  /// nullopt: detect a header by whether the first row has a non-numeric
  /// feature cell.
  std::optional<bool> header;
};

/// Loads a feature dataset with one label/target column.
inline Dataset load_csv(const std::string& path, const LabelColumn& label_column, TaskKind task,
                        const CsvOptions& options = {}) {
  using namespace io_detail;
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    rows.push_back(split_csv(lines[i]));
    line_numbers.push_back(i + 1);
  }
  if (rows.empty()) throw DataError(path + ": file is empty");
  const std::size_t width = rows.front().size();
  if (width < 2) throw DataError(path + ": need at least one feature column and a label column");

  auto resolve_index = [&](long idx) {
    const long resolved = idx < 0 ? static_cast<long>(width) + idx : idx;
    if (resolved < 0 || resolved >= static_cast<long>(width)) {
      throw DataError(path + ": label column index out of range");
    }
    return static_cast<std::size_t>(resolved);
  };

  // With a named label column the first row must be a header. Otherwise the
  // first row is a header when one of its feature cells is not numeric.
  std::size_t label_col = 0;
  bool has_header = false;
  if (const auto* name = std::get_if<std::string>(&label_column)) {
    if (options.header && !*options.header) {
      throw DataError(path + ": label column '" + *name + "' requires a header row");
    }
    has_header = true;
    std::size_t found = width;
    for (std::size_t c = 0; c < width; ++c) {
      if (trim(rows.front()[c]) == *name) found = c;
    }
    if (found == width) throw DataError(path + ": no column named '" + *name + "'");
    label_col = found;
  } else {
    label_col = resolve_index(std::get<long>(label_column));
    if (options.header) {
      has_header = *options.header;
    } else {
      for (std::size_t c = 0; c < width; ++c) {
        if (c != label_col && !parse_double(rows.front()[c])) has_header = true;
      }
    }
  }

  const std::size_t first = has_header ? 1 : 0;
  const std::size_t n = rows.size() - first;
  if (n == 0) throw DataError(path + ": file has a header but no data rows");
  const std::size_t d = width - 1;
  Matrix features(n, d);
  std::vector<std::string> raw_labels(n);
  std::vector<std::size_t> label_lines(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = rows[first + r];
    const std::size_t line = line_numbers[first + r];
    if (row.size() != width) {
      throw DataError(path + ": line " + std::to_string(line) + ": expected " +
                      std::to_string(width) + " columns, found " + std::to_string(row.size()));
    }
    std::size_t out_col = 0;
    for (std::size_t c = 0; c < width; ++c) {
      if (c == label_col) {
        raw_labels[r] = row[c];
        continue;
      }
      auto v = parse_double(row[c]);
      if (!v) {
        throw DataError(path + ": line " + std::to_string(line) + ", column " +
                        std::to_string(c + 1) + ": cannot parse '" + row[c] + "' as a number");
      }
      features(r, out_col++) = *v;
    }
    label_lines[r] = line;
  }

  Dataset data;
  data.item_count = n;
  data.representation = Representation::features;
  data.values = std::make_shared<const Matrix>(std::move(features));
  assign_responses(data, raw_labels, task, path, label_lines);
  data.finalize();
  return data;
}

/// Loads sparse "label idx:val ..." lines with 1-based increasing indices;
/// the dense dimension is the largest index seen.
inline Dataset load_libsvm(const std::string& path, TaskKind task) {
  using namespace io_detail;
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  std::vector<std::vector<std::pair<std::size_t, double>>> sparse;
  std::vector<std::string> raw_labels;
  std::vector<std::size_t> line_numbers;
  std::size_t dim = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::vector<std::string_view> tokens;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      std::size_t end = pos;
      while (end < line.size() && line[end] != ' ' && line[end] != '\t') ++end;
      if (end > pos) tokens.push_back(line.substr(pos, end - pos));
      pos = end;
    }
    raw_labels.emplace_back(tokens.front());
    line_numbers.push_back(i + 1);
    auto& entries = sparse.emplace_back();
    std::size_t prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto colon = tokens[t].find(':');
      const auto where = path + ": line " + std::to_string(i + 1) + ", token " + std::to_string(t + 1);
      if (colon == std::string_view::npos) throw DataError(where + ": expected idx:val");
      auto idx = parse_long(tokens[t].substr(0, colon));
      auto val = parse_double(tokens[t].substr(colon + 1));
      if (!idx || !val || *idx < 1) throw DataError(where + ": malformed pair '" + std::string(tokens[t]) + "'");
      const auto index = static_cast<std::size_t>(*idx);
      if (index <= prev) throw DataError(where + ": indices must be strictly increasing");
      prev = index;
      dim = std::max(dim, index);
      entries.emplace_back(index - 1, *val);
    }
  }
  if (sparse.empty()) throw DataError(path + ": file is empty");
  Matrix features(sparse.size(), dim);
  for (std::size_t r = 0; r < sparse.size(); ++r) {
    for (auto [c, v] : sparse[r]) features(r, c) = v;
  }
  Dataset data;
  data.item_count = sparse.size();
  data.representation = Representation::features;
  data.values = std::make_shared<const Matrix>(std::move(features));
  assign_responses(data, raw_labels, task, path, line_numbers);
  data.finalize();
  return data;
}

/// Header-free numeric CSV (rows may have any common width).
inline Matrix load_matrix_csv(const std::string& path) {
  using namespace io_detail;
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    auto cells = split_csv(lines[i]);
    if (rows == 0) cols = cells.size();
    if (cells.size() != cols) {
      throw DataError(path + ": line " + std::to_string(i + 1) + ": expected " +
                      std::to_string(cols) + " columns, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto v = parse_double(cells[c]);
      if (!v) {
        throw DataError(path + ": line " + std::to_string(i + 1) + ", column " +
                        std::to_string(c + 1) + ": cannot parse '" + cells[c] + "'");
      }
      values.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) throw DataError(path + ": file is empty");
  return Matrix(rows, cols, std::move(values));
}

/// Binary matrix: little-endian u64 row count followed by rows * cols
/// little-endian IEEE-754 doubles; cols is inferred from the payload size.
inline Matrix load_matrix_binary(const std::string& path) {
  const std::string bytes = io_detail::read_file(path);
  if (bytes.size() < 8) throw DataError(path + ": truncated matrix header");
  auto u64_at = [&](std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[off + i]);
    return v;
  };
  const std::uint64_t rows = u64_at(0);
  const std::size_t payload = bytes.size() - 8;
  if (rows == 0 || payload % 8 != 0 || (payload / 8) % rows != 0) {
    throw DataError(path + ": matrix payload does not match its row count");
  }
  const std::size_t cols = payload / 8 / rows;
  std::vector<double> values(rows * cols);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::bit_cast<double>(u64_at(8 + 8 * i));
  return Matrix(rows, cols, std::move(values));
}

/// Dispatches on extension: ".bin"/".f64" (optionally ".gz") is binary,
/// anything else CSV.
inline Matrix load_matrix(const std::string& path) {
  std::string_view p = path;
  if (io_detail::ends_with(p, ".gz")) p.remove_suffix(3);
  if (io_detail::ends_with(p, ".bin") || io_detail::ends_with(p, ".f64")) return load_matrix_binary(path);
  return load_matrix_csv(path);
}

inline void save_matrix_binary(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  auto put = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xffu));
  };
  put(m.rows());
  for (double v : m.data()) put(std::bit_cast<std::uint64_t>(v));
  if (!out) throw DataError("failed writing " + path);
}

inline void save_matrix_csv(const Matrix& m, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot write " + path);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) std::fprintf(f, c ? ",%.17g" : "%.17g", m(r, c));
    std::fputc('\n', f);
  }
  std::fclose(f);
}

/// One label or target per line.
inline void load_responses(Dataset& data, const std::string& path, TaskKind task) {
  using namespace io_detail;
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  std::vector<std::string> raw;
  std::vector<std::size_t> numbers;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    raw.emplace_back(trim(lines[i]));
    numbers.push_back(i + 1);
  }
  if (raw.size() != data.item_count) {
    throw DataError(path + ": has " + std::to_string(raw.size()) + " responses for " +
                    std::to_string(data.item_count) + " items");
  }
  data.labels.reset();
  data.targets.reset();
  data.class_count = 0;
  assign_responses(data, raw, task, path, numbers);
  data.finalize();
}

/// Distance-matrix or kernel dataset with responses from a separate file.
inline Dataset load_pairwise(const std::string& matrix_path, const std::string& responses_path,
                             Representation representation, TaskKind task) {
  Matrix m = load_matrix(matrix_path);
  if (m.rows() != m.cols()) {
    throw DataError(matrix_path + ": pairwise matrix must be square, got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (representation == Representation::distances) DistanceMatrixOracle::validate(m);
  if (representation == Representation::gram) (void)GramOracle::induce(m);
  Dataset data;
  data.item_count = m.rows();
  data.representation = representation;
  data.values = std::make_shared<const Matrix>(std::move(m));
  load_responses(data, responses_path, task);
  return data;
}

/// Writes a feature dataset as header-free CSV with the response last.
inline void save_csv(const Dataset& data, const std::string& path) {
  if (!data.has_features()) throw DataError("save_csv requires a feature dataset");
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw DataError("cannot write " + path);
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (double v : data.values->row(r)) std::fprintf(f, "%.17g,", v);
    if (data.labels) {
      const auto code = (*data.labels)[r];
      if (data.class_names.empty()) {
        std::fprintf(f, "%u\n", code);
      } else {
        std::fprintf(f, "%s\n", data.class_names[code].c_str());
      }
    } else if (data.targets) {
      std::fprintf(f, "%.17g\n", (*data.targets)[r]);
    }
  }
  std::fclose(f);
}

}  // namespace comprf
