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

// Robustness benchmarking: evaluate a checkpoint over the filtered test-set
// grid, check the qualitative degradation trends, compare runs, and render
// CSV/markdown reports.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "passband/augment.hpp"
#include "passband/dataset.hpp"
#include "passband/gaussian.hpp"
#include "passband/testgrid.hpp"
#include "passband/train.hpp"

namespace passband {

struct CellKey {
  FilterKind kind = FilterKind::LowPass;
  double sigma = 0.0;
  int width = 0;

  bool operator<(const CellKey& o) const {
    if (kind != o.kind) return kind < o.kind;
    if (sigma != o.sigma) return sigma < o.sigma;
    return width < o.width;
  }
  bool operator==(const CellKey& o) const {
    return kind == o.kind && sigma == o.sigma && width == o.width;
  }
};

/// Accuracy over the clean test set plus one accuracy per grid cell, all as
/// fractions in [0, 1].
struct AccuracyGrid {
  double clean_accuracy = 0.0;
  std::map<CellKey, double> cells;
  std::string model_id;
  std::string dataset_id;

  std::vector<double> sigmas() const {
    std::set<double> s;
    for (const auto& [key, acc] : cells) s.insert(key.sigma);
    return {s.begin(), s.end()};
  }
  std::vector<int> widths() const {
    std::set<int> w;
    for (const auto& [key, acc] : cells) w.insert(key.width);
    return {w.begin(), w.end()};
  }
  double at(FilterKind kind, double sigma, int width) const {
    auto it = cells.find(CellKey{kind, sigma, width});
    if (it == cells.end())
      throw std::invalid_argument("AccuracyGrid: missing cell " + std::string(to_string(kind)) +
                                  " sigma=" + format_compact(sigma) +
                                  " width=" + std::to_string(width));
    return it->second;
  }
  /// True when cells form the full kinds x sigmas x widths cross product.
  bool complete() const {
    const auto s = sigmas();
    const auto w = widths();
    return !cells.empty() &&
           cells.size() == 2 * s.size() * w.size();
  }
};

/// Evaluates the checkpointed model once per manifest entry. The manifest
/// must list the clean set and the 36 filtered sets; images are decoded with
/// each entry's pixel encoding, normalized with the supplied training-set
/// statistics, and scored in eval mode. Deterministic; cells may be
/// evaluated in parallel (the model is cloned per worker).
inline AccuracyGrid run_grid(BottleneckNet<float>& model, const std::string& manifest_path,
                             const ChannelStats& stats, int threads = 1, int eval_batch = 256) {
  tune_allocator_for_large_buffers();
  Manifest manifest = read_manifest(manifest_path);
  if (manifest.entries.empty())
    throw std::invalid_argument("run_grid: manifest has no entries: " + manifest_path);
  const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();

  AccuracyGrid grid;
  grid.dataset_id = std::filesystem::path(manifest_path).parent_path().filename().string();
  bool has_clean = false;
  std::vector<double> accuracies(manifest.entries.size());
  std::vector<BottleneckNet<float>> clones;
  if (threads > 1) clones.assign(static_cast<std::size_t>(threads), model);

  parallel_for(manifest.entries.size(), threads, [&](std::size_t i) {
    const ManifestEntry& entry = manifest.entries[i];
    const std::string path = (base / entry.path).string();
    LabeledDataset ds;
    try {
      ds = load_record_file(path, model.num_classes, entry.encoding, 32, 32, 3);
    } catch (const io_error&) {
      throw io_error("run_grid: cell " + entry.kind + " sigma=" + format_compact(entry.sigma) +
                     " width=" + std::to_string(entry.width) + " dataset missing: " + path);
    }
    normalize_in_place(ds, stats);
    BottleneckNet<float>& m = threads > 1 ? clones[i % threads] : model;
    accuracies[i] = evaluate(m, ds, eval_batch);
  });

  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const ManifestEntry& entry = manifest.entries[i];
    if (entry.is_clean()) {
      grid.clean_accuracy = accuracies[i];
      has_clean = true;
    } else {
      grid.cells[CellKey{filter_kind_from_string(entry.kind), entry.sigma, entry.width}] =
          accuracies[i];
    }
  }
  if (!has_clean) throw std::invalid_argument("run_grid: manifest lacks a Clean entry");
  return grid;
}

struct TrendCheck {
  std::string name;
  bool pass = false;
  std::string details;
};

/// The qualitative degradation structure, with a slack tolerance in accuracy
/// points: (a) high-pass accuracy does not rise from the narrowest to the
/// widest kernel; (b) at widths >= 3, low-sigma high-pass is at most
/// high-sigma high-pass; (c) per width, high-sigma low-pass is at most
/// low-sigma low-pass; (d) clean accuracy dominates every high-pass cell of
/// width >= 3.
inline std::vector<TrendCheck> trend_checks(const AccuracyGrid& grid, double slack_points = 2.0) {
  if (!grid.complete())
    throw std::invalid_argument("trend_checks: grid is not a complete cross product");
  const std::vector<double> sigmas = grid.sigmas();
  const std::vector<int> widths = grid.widths();
  const double s_lo = sigmas.front(), s_hi = sigmas.back();
  const int w_lo = widths.front(), w_hi = widths.back();
  const double t = slack_points;
  auto pct = [](double v) { return v * 100.0; };
  char buf[160];

  std::vector<TrendCheck> checks;
  {
    TrendCheck c{"highpass_width_degradation", true, ""};
    for (double sigma : sigmas) {
      const double wide = pct(grid.at(FilterKind::HighPass, sigma, w_hi));
      const double narrow = pct(grid.at(FilterKind::HighPass, sigma, w_lo));
      if (wide > narrow + t) c.pass = false;
      std::snprintf(buf, sizeof(buf), "sigma=%g: w%d %.2f vs w%d %.2f; ", sigma, w_hi, wide, w_lo,
                    narrow);
      c.details += buf;
    }
    checks.push_back(c);
  }
  {
    TrendCheck c{"highpass_low_sigma_hardest", true, ""};
    for (int width : widths) {
      if (width < 3) continue;
      const double low = pct(grid.at(FilterKind::HighPass, s_lo, width));
      const double high = pct(grid.at(FilterKind::HighPass, s_hi, width));
      if (low > high + t) c.pass = false;
      std::snprintf(buf, sizeof(buf), "w=%d: s%g %.2f vs s%g %.2f; ", width, s_lo, low, s_hi,
                    high);
      c.details += buf;
    }
    checks.push_back(c);
  }
  {
    TrendCheck c{"lowpass_high_sigma_hardest", true, ""};
    for (int width : widths) {
      const double high = pct(grid.at(FilterKind::LowPass, s_hi, width));
      const double low = pct(grid.at(FilterKind::LowPass, s_lo, width));
      if (high > low + t) c.pass = false;
      std::snprintf(buf, sizeof(buf), "w=%d: s%g %.2f vs s%g %.2f; ", width, s_hi, high, s_lo,
                    low);
      c.details += buf;
    }
    checks.push_back(c);
  }
  {
    TrendCheck c{"clean_dominates_highpass", true, ""};
    const double clean = pct(grid.clean_accuracy);
    for (double sigma : sigmas)
      for (int width : widths) {
        if (width < 3) continue;
        const double cell = pct(grid.at(FilterKind::HighPass, sigma, width));
        if (clean < cell - t) c.pass = false;
      }
    std::snprintf(buf, sizeof(buf), "clean %.2f vs max high-pass cell at width >= 3", clean);
    c.details = buf;
    checks.push_back(c);
  }
  return checks;
}

struct GridComparison {
  AccuracyGrid baseline;
  AccuracyGrid treated;
  std::map<CellKey, double> deltas;  // treated - baseline, as fractions
  double clean_delta = 0.0;
  double mean_delta_highpass = 0.0;
  double mean_delta_lowpass = 0.0;
  double mean_delta = 0.0;
  CellKey worst_cell;
  double worst_delta = 0.0;
};

/// Per-cell treated-minus-baseline deltas plus summary statistics.
inline GridComparison compare(const AccuracyGrid& baseline, const AccuracyGrid& treated) {
  if (baseline.cells.size() != treated.cells.size())
    throw std::invalid_argument("compare: grids have different cell counts");
  GridComparison out;
  out.baseline = baseline;
  out.treated = treated;
  out.clean_delta = treated.clean_accuracy - baseline.clean_accuracy;
  double sum_high = 0.0, sum_low = 0.0, sum = 0.0;
  int n_high = 0, n_low = 0;
  bool first = true;
  for (const auto& [key, base_acc] : baseline.cells) {
    auto it = treated.cells.find(key);
    if (it == treated.cells.end())
      throw std::invalid_argument("compare: treated grid lacks cell " +
                                  std::string(to_string(key.kind)) +
                                  " sigma=" + format_compact(key.sigma) +
                                  " width=" + std::to_string(key.width));
    const double delta = it->second - base_acc;
    out.deltas[key] = delta;
    sum += delta;
    if (key.kind == FilterKind::HighPass) {
      sum_high += delta;
      ++n_high;
    } else {
      sum_low += delta;
      ++n_low;
    }
    if (first || delta < out.worst_delta) {
      out.worst_delta = delta;
      out.worst_cell = key;
      first = false;
    }
  }
  out.mean_delta = baseline.cells.empty() ? 0.0 : sum / static_cast<double>(baseline.cells.size());
  out.mean_delta_highpass = n_high ? sum_high / n_high : 0.0;
  out.mean_delta_lowpass = n_low ? sum_low / n_low : 0.0;
  return out;
}

enum class ReportFormat { Csv, Markdown };

namespace detail {

inline std::string pct2(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

inline std::string grid_csv(const AccuracyGrid& grid) {
  std::string out;
  if (!grid.model_id.empty()) out += "# model_id=" + grid.model_id + "\n";
  if (!grid.dataset_id.empty()) out += "# dataset_id=" + grid.dataset_id + "\n";
  out += "kind,sigma,width,accuracy\n";
  out += "Clean,0,0," + pct2(grid.clean_accuracy) + "\n";
  for (const auto& [key, acc] : grid.cells)
    out += std::string(to_string(key.kind)) + "," + format_compact(key.sigma) + "," +
           std::to_string(key.width) + "," + pct2(acc) + "\n";
  return out;
}

inline std::string comparison_csv(const GridComparison& cmp) {
  std::string out = "kind,sigma,width,accuracy,delta\n";
  out += "Clean,0,0," + pct2(cmp.treated.clean_accuracy) + "," + pct2(cmp.clean_delta) + "\n";
  for (const auto& [key, delta] : cmp.deltas)
    out += std::string(to_string(key.kind)) + "," + format_compact(key.sigma) + "," +
           std::to_string(key.width) + "," + pct2(cmp.treated.cells.at(key)) + "," + pct2(delta) +
           "\n";
  return out;
}

// One table per filter kind, sigma rows by width columns, accuracies as
// percentages with two decimals; the layout of the published tables.
template <typename CellText>
std::string markdown_tables(const AccuracyGrid& grid, CellText&& cell_text) {
  const std::vector<double> sigmas = grid.sigmas();
  const std::vector<int> widths = grid.widths();
  std::string out;
  for (FilterKind kind : {FilterKind::HighPass, FilterKind::LowPass}) {
    out += std::string("### ") + (kind == FilterKind::HighPass ? "High Pass" : "Low Pass") + "\n\n";
    out += "| Sigma |";
    for (int w : widths) out += " w=" + std::to_string(w) + " |";
    out += "\n|---|";
    for (std::size_t i = 0; i < widths.size(); ++i) out += "---|";
    out += "\n";
    for (double sigma : sigmas) {
      out += "| " + format_compact(sigma) + " |";
      for (int w : widths) out += " " + cell_text(kind, sigma, w) + " |";
      out += "\n";
    }
    out += "\n";
  }
  return out;
}

}  // namespace detail

/// Renders a grid. CSV carries kind,sigma,width,accuracy rows (the clean set
/// as a Clean,0,0 row); markdown mirrors the published table layout.
inline std::string emit_report(const AccuracyGrid& grid, ReportFormat format) {
  if (!grid.complete())
    throw std::invalid_argument("emit_report: grid is not a complete cross product");
  if (format == ReportFormat::Csv) return detail::grid_csv(grid);
  std::string out = "Clean accuracy: " + detail::pct2(grid.clean_accuracy) + "%\n\n";
  out += detail::markdown_tables(
      grid, [&](FilterKind k, double s, int w) { return detail::pct2(grid.at(k, s, w)); });
  return out;
}

/// Renders a comparison: treated accuracy plus treated-minus-baseline delta.
inline std::string emit_report(const GridComparison& cmp, ReportFormat format) {
  if (!cmp.treated.complete() || cmp.deltas.empty())
    throw std::invalid_argument("emit_report: comparison is not complete");
  if (format == ReportFormat::Csv) return detail::comparison_csv(cmp);
  char head[160];
  std::snprintf(head, sizeof(head),
                "Clean accuracy: %s%% (delta %+.2f); mean cell delta %+.2f "
                "(high-pass %+.2f, low-pass %+.2f)\n\n",
                detail::pct2(cmp.treated.clean_accuracy).c_str(), cmp.clean_delta * 100.0,
                cmp.mean_delta * 100.0, cmp.mean_delta_highpass * 100.0,
                cmp.mean_delta_lowpass * 100.0);
  std::string out = head;
  out += detail::markdown_tables(cmp.treated, [&](FilterKind k, double s, int w) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f (%+.2f)", cmp.treated.at(k, s, w) * 100.0,
                  cmp.deltas.at(CellKey{k, s, w}) * 100.0);
    return std::string(buf);
  });
  return out;
}

/// Parses the CSV schema back into a grid (the round trip is exact to the
/// two-decimal formatting). Lines starting with '#' carry the ids.
inline AccuracyGrid parse_grid_csv(const std::string& text) {
  AccuracyGrid grid;
  std::istringstream in(text);
  std::string line;
  bool have_header = false, have_clean = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        while (!key.empty() && key.front() == ' ') key.erase(key.begin());
        if (key == "model_id") grid.model_id = line.substr(eq + 1);
        if (key == "dataset_id") grid.dataset_id = line.substr(eq + 1);
      }
      continue;
    }
    if (!have_header) {
      if (line.rfind("kind,sigma,width,accuracy", 0) != 0)
        throw format_error("grid csv: unexpected header '" + line + "'");
      have_header = true;
      continue;
    }
    std::istringstream row(line);
    std::string kind, sigma, width, accuracy;
    std::getline(row, kind, ',');
    std::getline(row, sigma, ',');
    std::getline(row, width, ',');
    std::getline(row, accuracy, ',');
    if (accuracy.empty()) throw format_error("grid csv: short row '" + line + "'");
    const double acc = std::stod(accuracy) / 100.0;
    if (kind == "Clean") {
      grid.clean_accuracy = acc;
      have_clean = true;
    } else {
      grid.cells[CellKey{filter_kind_from_string(kind), std::stod(sigma), std::stoi(width)}] = acc;
    }
  }
  if (!have_header || !have_clean)
    throw format_error("grid csv: missing header or Clean row");
  return grid;
}

inline AccuracyGrid load_grid_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("grid csv not found: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_grid_csv(buf.str());
}

}  // namespace passband
