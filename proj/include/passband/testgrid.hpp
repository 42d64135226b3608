/*
 * Copyright 2026 The passband authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "passband/augment.hpp"
#include "passband/dataset.hpp"
#include "passband/gaussian.hpp"
#include "passband/parallel.hpp"

namespace passband {

/// The filtering grid: the cross product kinds x sigmas x widths. The
/// default is 2 x 3 x 6 = 36 cells.
struct GridSpec {
  std::vector<double> sigmas = {0.5, 1.0, 1.5};
  std::vector<int> widths = {2, 3, 4, 5, 6, 7};
  std::vector<FilterKind> kinds = {FilterKind::HighPass, FilterKind::LowPass};

  void validate() const {
    if (sigmas.empty() || widths.empty() || kinds.empty())
      throw std::invalid_argument("GridSpec: empty axis");
    for (double s : sigmas)
      if (!(s > 0.0)) throw std::invalid_argument("GridSpec: sigmas must be > 0");
    for (int w : widths)
      if (w < 1) throw std::invalid_argument("GridSpec: widths must be >= 1");
  }

  std::vector<FilterSpec> cells() const {
    validate();
    std::vector<FilterSpec> out;
    for (FilterKind kind : kinds)
      for (double sigma : sigmas)
        for (int width : widths) out.push_back(FilterSpec{kind, sigma, width});
    return out;
  }
};

inline std::string format_compact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

/// One dataset in a generated grid. `kind` is "Clean", "HighPass", or
/// "LowPass"; `path` is relative to the manifest file.
struct ManifestEntry {
  std::string kind;
  double sigma = 0.0;
  int width = 0;
  std::size_t count = 0;
  std::string path;
  PixelEncoding encoding = PixelEncoding::Unsigned;

  bool is_clean() const { return kind == "Clean"; }
  FilterSpec spec() const { return FilterSpec{filter_kind_from_string(kind), sigma, width}; }
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

inline void write_manifest(const std::string& path, const Manifest& manifest) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + path);
  bool first = true;
  for (const auto& e : manifest.entries) {
    if (!first) f << "\n";
    first = false;
    f << "kind=" << e.kind << "\n"
      << "sigma=" << format_compact(e.sigma) << "\n"
      << "width=" << e.width << "\n"
      << "count=" << e.count << "\n"
      << "path=" << e.path << "\n"
      << "encoding=" << to_string(e.encoding) << "\n";
  }
  if (!f) throw io_error("short write: " + path);
}

inline Manifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("manifest not found: " + path);
  Manifest manifest;
  ManifestEntry entry;
  bool open = false;
  std::string line;
  auto flush = [&] {
    if (open) manifest.entries.push_back(entry);
    entry = ManifestEntry{};
    open = false;
  };
  while (std::getline(f, line)) {
    if (line.empty()) {
      flush();
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw format_error(path + ": expected key=value, got '" + line + "'");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    open = true;
    if (key == "kind")
      entry.kind = value;
    else if (key == "sigma")
      entry.sigma = std::stod(value);
    else if (key == "width")
      entry.width = std::stoi(value);
    else if (key == "count")
      entry.count = static_cast<std::size_t>(std::stoull(value));
    else if (key == "path")
      entry.path = value;
    else if (key == "encoding")
      entry.encoding = pixel_encoding_from_string(value);
    else
      throw format_error(path + ": unknown manifest field '" + key + "'");
  }
  flush();
  return manifest;
}

inline std::string grid_cell_filename(const FilterSpec& spec) {
  std::string kind = spec.kind == FilterKind::HighPass ? "highpass" : "lowpass";
  return kind + "_s" + format_compact(spec.sigma) + "_w" + std::to_string(spec.width) + ".bin";
}

/// Filters the whole test set once per grid cell and writes each derived set
/// next to a manifest.txt in `out_dir`. Every cell preserves cardinality,
/// label sequence, and item order; the clean set is written alongside as the
/// first entry. High-pass cells are stored with the signed pixel encoding.
/// Fully deterministic.
inline Manifest generate_test_grid(const LabeledDataset& test, const GridSpec& grid,
                                   const std::string& out_dir, int threads = 1) {
  grid.validate();
  check_dataset(test, "generate_test_grid");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create output directory: " + out_dir);

  Manifest manifest;
  ManifestEntry clean;
  clean.kind = "Clean";
  clean.count = test.items.size();
  clean.path = "clean.bin";
  clean.encoding = PixelEncoding::Unsigned;
  save_record_file((std::filesystem::path(out_dir) / clean.path).string(), test, clean.encoding);
  manifest.entries.push_back(clean);

  for (const FilterSpec& spec : grid.cells()) {
    LabeledDataset cell;
    cell.num_classes = test.num_classes;
    cell.name = grid_cell_filename(spec);
    cell.items.resize(test.items.size());
    parallel_for(test.items.size(), threads, [&](std::size_t i) {
      cell.items[i].label = test.items[i].label;
      cell.items[i].image = apply_filter(test.items[i].image, spec);
    });
    ManifestEntry e;
    e.kind = to_string(spec.kind);
    e.sigma = spec.sigma;
    e.width = spec.width;
    e.count = cell.items.size();
    e.path = grid_cell_filename(spec);
    e.encoding = spec.kind == FilterKind::HighPass ? PixelEncoding::Signed : PixelEncoding::Unsigned;
    save_record_file((std::filesystem::path(out_dir) / e.path).string(), cell, e.encoding);
    manifest.entries.push_back(e);
  }
  write_manifest((std::filesystem::path(out_dir) / "manifest.txt").string(), manifest);
  return manifest;
}

}  // namespace passband
