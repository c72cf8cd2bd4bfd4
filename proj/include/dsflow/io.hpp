#pragma once

// Dataset files (CSV, IDX image/label pairs) and line-delimited trajectory
// records.

#include <filesystem>
#include <fstream>
#include <string>

#include "dsflow/dynamics.hpp"

namespace dsflow {

// CSV with a header row: feature columns in order plus an integer "label"
// column (any position). Throws ParseError with the 1-based line number.
DatasetState load_csv(const std::filesystem::path& path);
DatasetState parse_csv(const std::string& text);
// Writes f0..f{d-1},label with shortest round-trip number formatting.
void save_csv(const DatasetState& state, const std::filesystem::path& path);
std::string format_csv(const DatasetState& state);

struct IdxOptions {
  int downscale = 1;      // average-pool factor per image axis
  int per_class_cap = 0;  // keep at most this many images per label; 0 keeps all
};

// MNIST-style IDX pair (unsigned byte images and labels). Pixels are scaled
// to [0, 1]. Throws ParseError naming the byte offset of a malformed header.
DatasetState load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                      const IdxOptions& opts = {});

// One JSON object per line with keys step, objective, terms, wall_time,
// features, labels, label_dists and, in jd-vl, particle_dists.
std::string trajectory_record(const Snapshot& s, const Trajectory& meta);

class TrajectoryWriter {
 public:
  explicit TrajectoryWriter(const std::filesystem::path& path);
  void write(const Snapshot& s, const Trajectory& meta);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

// Reads every complete record. A final line that does not parse (a write cut
// short) is ignored; a malformed earlier line raises ParseError.
Trajectory read_trajectory(const std::filesystem::path& path);
Trajectory parse_trajectory(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dsflow
