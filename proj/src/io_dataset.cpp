#include <array>
#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string_view>
#include <vector>

#include "dsflow/error.hpp"
#include "dsflow/io.hpp"

namespace dsflow {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
  T v{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw ParseError("line " + std::to_string(line) + ": invalid " + what + " '" +
                         std::string(field) + "'",
                     line);
  }
  return v;
}

void append_number(std::string& out, double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

std::uint32_t read_be32(const std::string& bytes, std::size_t offset, const std::string& file) {
  if (offset + 4 > bytes.size()) {
    throw ParseError(file + ": truncated header at byte offset " + std::to_string(offset), 0);
  }
  std::uint32_t v = 0;
  for (std::size_t k = 0; k < 4; ++k) v = (v << 8) | static_cast<unsigned char>(bytes[offset + k]);
  return v;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("error while writing '" + path.string() + "'");
}

DatasetState parse_csv(const std::string& text) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      lines.push_back(rest.substr(0, nl));
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw ParseError("empty CSV input", 1);

  const auto header = split(trim(lines[first]));
  std::ptrdiff_t label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "label") label_col = static_cast<std::ptrdiff_t>(c);
  }
  if (label_col < 0) throw ParseError("CSV header has no 'label' column", first + 1);
  const auto d = static_cast<Eigen::Index>(header.size() - 1);

  std::vector<double> values;
  std::vector<int> labels;
  for (std::size_t l = first + 1; l < lines.size(); ++l) {
    const std::string_view line = trim(lines[l]);
    if (line.empty()) continue;
    const std::size_t lineno = l + 1;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(lineno) + ": expected " +
                           std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       lineno);
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (static_cast<std::ptrdiff_t>(c) == label_col) {
        const int y = parse_number<int>(fields[c], lineno, "label");
        if (y < 0) throw ParseError("line " + std::to_string(lineno) + ": negative label", lineno);
        labels.push_back(y);
      } else {
        values.push_back(parse_number<double>(fields[c], lineno, "number"));
      }
    }
  }
  if (labels.empty()) throw ParseError("CSV has a header but no data rows", first + 1);
  const auto n = static_cast<Eigen::Index>(labels.size());
  RowMatrix x = Eigen::Map<const RowMatrix>(values.data(), n, d);
  return make_state(std::move(x), std::move(labels));
}

DatasetState load_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

std::string format_csv(const DatasetState& state) {
  std::string out;
  for (Eigen::Index c = 0; c < state.dim(); ++c) out += "f" + std::to_string(c) + ",";
  out += "label\n";
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    for (Eigen::Index c = 0; c < state.dim(); ++c) {
      append_number(out, state.features(i, c));
      out += ',';
    }
    out += std::to_string(state.labels[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  return out;
}

void save_csv(const DatasetState& state, const std::filesystem::path& path) {
  write_text_file(path, format_csv(state));
}

DatasetState load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                      const IdxOptions& opts) {
  if (opts.downscale < 1) throw ConfigError("idx downscale must be at least 1");
  if (opts.per_class_cap < 0) throw ConfigError("idx per_class_cap must be nonnegative");
  const std::string img = read_text_file(images);
  const std::string lab = read_text_file(labels);
  const std::string iname = images.string();
  const std::string lname = labels.string();

  if (read_be32(img, 0, iname) != 0x00000803u) {
    throw ParseError(iname + ": bad magic number at byte offset 0 (expected 0x00000803)", 0);
  }
  if (read_be32(lab, 0, lname) != 0x00000801u) {
    throw ParseError(lname + ": bad magic number at byte offset 0 (expected 0x00000801)", 0);
  }
  const std::size_t count = read_be32(img, 4, iname);
  const std::size_t rows = read_be32(img, 8, iname);
  const std::size_t cols = read_be32(img, 12, iname);
  const std::size_t lcount = read_be32(lab, 4, lname);
  if (count != lcount) {
    throw ParseError("image count " + std::to_string(count) + " differs from label count " +
                         std::to_string(lcount) + " (byte offset 4)",
                     0);
  }
  if (img.size() != 16 + count * rows * cols) {
    throw ParseError(iname + ": expected " + std::to_string(16 + count * rows * cols) +
                         " bytes, found " + std::to_string(img.size()),
                     0);
  }
  if (lab.size() != 8 + count) {
    throw ParseError(lname + ": expected " + std::to_string(8 + count) + " bytes, found " +
                         std::to_string(lab.size()),
                     0);
  }
  const auto f = static_cast<std::size_t>(opts.downscale);
  const std::size_t out_rows = rows / f;
  const std::size_t out_cols = cols / f;
  if (out_rows == 0 || out_cols == 0) throw ConfigError("idx downscale larger than the image");

  std::vector<std::size_t> keep;
  std::map<int, int> taken;
  for (std::size_t i = 0; i < count; ++i) {
    const int y = static_cast<unsigned char>(lab[8 + i]);
    if (opts.per_class_cap > 0 && taken[y] >= opts.per_class_cap) continue;
    taken[y] += 1;
    keep.push_back(i);
  }
  if (keep.empty()) throw ParseError(iname + ": no images", 0);

  const double norm = 255.0 * static_cast<double>(f * f);
  RowMatrix x(static_cast<Eigen::Index>(keep.size()), static_cast<Eigen::Index>(out_rows * out_cols));
  std::vector<int> y(keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const std::size_t i = keep[k];
    const std::size_t base = 16 + i * rows * cols;
    for (std::size_t r = 0; r < out_rows; ++r) {
      for (std::size_t c = 0; c < out_cols; ++c) {
        unsigned sum = 0;
        for (std::size_t dr = 0; dr < f; ++dr) {
          for (std::size_t dc = 0; dc < f; ++dc) {
            sum += static_cast<unsigned char>(img[base + (r * f + dr) * cols + c * f + dc]);
          }
        }
        x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(r * out_cols + c)) = sum / norm;
      }
    }
    y[k] = static_cast<unsigned char>(lab[8 + i]);
  }
  return make_state(std::move(x), std::move(y));
}

}  // namespace dsflow
