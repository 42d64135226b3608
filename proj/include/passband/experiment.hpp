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

// End-to-end experiment steps shared by the CLI and the integration tests:
// load splits, train (optionally on the stochastically doubled set), and
// persist the run artifacts.

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "passband/accuracy_grid.hpp"
#include "passband/checkpoint.hpp"
#include "passband/config.hpp"
#include "passband/train.hpp"

namespace passband {

inline LabeledDataset load_split(const DatasetConfig& config, Split split) {
  const std::size_t limit = split == Split::Train ? config.train_limit : config.test_limit;
  if (config.dir.empty()) throw std::invalid_argument("config: dataset.dir is required");
  return load_cifar10(config.dir, split, limit, config.num_classes);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + path);
  f << text;
  if (!f) throw io_error("short write: " + path);
}

/// Sidecar provenance: one "source_index,kind,sigma,width" line per
/// generated copy. Sigma is printed with full precision so the file is
/// byte-stable and exactly replayable.
inline std::string format_provenance_csv(const std::vector<AugmentRecord>& records) {
  std::string out = "source_index,kind,sigma,width\n";
  char line[96];
  for (const AugmentRecord& rec : records) {
    std::snprintf(line, sizeof(line), "%zu,%s,%.17g,%d\n", rec.source_index,
                  to_string(rec.spec.kind), rec.spec.sigma, rec.spec.width);
    out += line;
  }
  return out;
}

struct TrainingArtifacts {
  TrainResult result;
  ChannelStats stats;                     // resolved normalization statistics
  std::vector<AugmentRecord> provenance;  // empty unless stochastic_augment
};

/// Runs the training recipe on already-loaded raw [0,1] splits: resolve
/// normalization statistics from the original train split, optionally double
/// it with stochastic filtering, normalize, train.
inline TrainingArtifacts run_training(const ExperimentConfig& config, LabeledDataset train_raw,
                                      LabeledDataset val_raw,
                                      const std::function<void(const EpochMetrics&)>& on_epoch = nullptr,
                                      int threads = 1) {
  TrainingArtifacts artifacts;
  artifacts.stats =
      config.normalization.empty() ? channel_stats(train_raw) : config.normalization.stats();
  if (config.train.stochastic_augment) {
    AugmentOutcome out = stochastic_augment(train_raw, config.augment, threads);
    train_raw = std::move(out.dataset);
    artifacts.provenance = std::move(out.provenance);
  }
  normalize_in_place(train_raw, artifacts.stats);
  normalize_in_place(val_raw, artifacts.stats);
  artifacts.result = train(config.train, train_raw, val_raw, on_epoch);
  return artifacts;
}

/// Persists a finished run: checkpoint, metrics log, resolved config (with
/// the normalization statistics filled in), and the augmentation provenance
/// when stochastic filtering was used.
inline ExperimentConfig write_training_artifacts(const ExperimentConfig& config,
                                                 TrainingArtifacts& artifacts,
                                                 const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  ExperimentConfig resolved = config;
  resolved.normalization.mean = artifacts.stats.mean;
  resolved.normalization.stddev = artifacts.stats.stddev;

  CheckpointMeta meta;
  meta.config_hash = config_hash(resolved);
  meta.epoch = static_cast<std::uint32_t>(config.train.epochs);
  meta.rng_state = artifacts.result.final_rng_state;
  save_checkpoint((std::filesystem::path(out_dir) / "checkpoint.bin").string(),
                  artifacts.result.model, meta);
  write_text_file((std::filesystem::path(out_dir) / "metrics.csv").string(),
                  format_metrics_csv(artifacts.result.metrics));
  write_text_file((std::filesystem::path(out_dir) / "config.resolved.json").string(),
                  serialize_config(resolved));
  if (!artifacts.provenance.empty())
    write_text_file((std::filesystem::path(out_dir) / "augment_provenance.csv").string(),
                    format_provenance_csv(artifacts.provenance));
  return resolved;
}

}  // namespace passband
