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

// passband: generate high/low-pass filtered test grids, train the desk-scale
// bottleneck-residual model with or without stochastic filtering
// augmentation, and report accuracy grids.
//
// Exit codes: 0 success, 2 invalid arguments or config, 1 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "passband/accuracy_grid.hpp"
#include "passband/alloc_tuning.hpp"
#include "passband/config.hpp"
#include "passband/experiment.hpp"
#include "passband/image_io.hpp"
#include "passband/synth.hpp"
#include "passband/testgrid.hpp"

namespace {

namespace fs = std::filesystem;
using namespace passband;

struct CommonOpts {
  std::string config_path;
  std::string out_override;
  std::int64_t seed_override = -1;
  int threads = 0;  // 0: all cores for filtering/eval
};

ExperimentConfig load_common(const CommonOpts& opts) {
  ExperimentConfig config = load_config(opts.config_path);
  if (!opts.out_override.empty()) config.out_dir = opts.out_override;
  if (opts.seed_override >= 0) {
    config.train.seed = static_cast<std::uint64_t>(opts.seed_override);
    config.augment.seed = static_cast<std::uint64_t>(opts.seed_override);
  }
  return config;
}

int worker_threads(const CommonOpts& opts) {
  return opts.threads > 0 ? opts.threads : default_thread_count();
}

void write_resolved_config(const ExperimentConfig& config) {
  fs::create_directories(config.out_dir);
  write_text_file((fs::path(config.out_dir) / "config.resolved.json").string(),
                  serialize_config(config));
}

int cmd_filter(const std::string& in, const std::string& out, const std::string& kind,
               double sigma, int width) {
  FilterSpec spec{filter_kind_from_string(kind), sigma, width};
  spec.validate();
  ImageTensor img = to_unit(read_pnm(in));
  ImageTensor filtered = apply_filter(img, spec);
  write_image(out, to_display_u8(filtered, spec.kind == FilterKind::HighPass));
  std::printf("filter: %s -> %s (%s sigma=%s width=%d)\n", in.c_str(), out.c_str(),
              to_string(spec.kind), format_compact(sigma).c_str(), width);
  return 0;
}

int cmd_gen_testsets(const CommonOpts& opts) {
  ExperimentConfig config = load_common(opts);
  LabeledDataset test = load_split(config.dataset, Split::Test);
  const std::string dir = (fs::path(config.out_dir) / "testsets").string();
  Manifest manifest = generate_test_grid(test, config.grid, dir, worker_threads(opts));
  write_resolved_config(config);
  std::printf("gen-testsets: %zu datasets (%zu records each) -> %s\n",
              manifest.entries.size(), test.items.size(), dir.c_str());
  return 0;
}

int cmd_augment(const CommonOpts& opts) {
  ExperimentConfig config = load_common(opts);
  LabeledDataset train_set = load_split(config.dataset, Split::Train);
  AugmentOutcome out = stochastic_augment(train_set, config.augment, worker_threads(opts));
  fs::create_directories(config.out_dir);
  // High-pass copies are signed, so the doubled set is persisted with the
  // signed encoding end to end. Training itself redraws the same copies in
  // memory (same seed) and never round-trips through this file.
  save_record_file((fs::path(config.out_dir) / "augmented_train.bin").string(), out.dataset,
                   PixelEncoding::Signed);
  write_text_file((fs::path(config.out_dir) / "augment_provenance.csv").string(),
                  format_provenance_csv(out.provenance));
  write_resolved_config(config);
  std::printf("augment: %zu -> %zu records (signed encoding), provenance for %zu copies -> %s\n",
              train_set.items.size(), out.dataset.items.size(), out.provenance.size(),
              config.out_dir.c_str());
  return 0;
}

int cmd_train(const CommonOpts& opts) {
  ExperimentConfig config = load_common(opts);
  LabeledDataset train_raw = load_split(config.dataset, Split::Train);
  LabeledDataset val_raw = load_split(config.dataset, Split::Test);
  std::fprintf(stderr, "train: %zu train / %zu val records, model=%s, epochs=%d%s\n",
               train_raw.items.size(), val_raw.items.size(), config.train.model.c_str(),
               config.train.epochs,
               config.train.stochastic_augment ? ", stochastic filtering augmentation" : "");
  TrainingArtifacts artifacts = run_training(
      config, std::move(train_raw), std::move(val_raw),
      [](const EpochMetrics& m) {
        std::fprintf(stderr, "  epoch %3d  lr %-8g loss %-8.4f val %-7.4f (%.1fs)\n", m.epoch,
                     m.lr, m.train_loss, m.val_acc, m.wall_seconds);
      },
      worker_threads(opts));
  write_training_artifacts(config, artifacts, config.out_dir);
  std::printf("train: wrote checkpoint.bin, metrics.csv, config.resolved.json -> %s\n",
              config.out_dir.c_str());
  return 0;
}

int cmd_eval(const CommonOpts& opts, std::string checkpoint_path, std::string manifest_path) {
  ExperimentConfig config = load_common(opts);
  if (checkpoint_path.empty())
    checkpoint_path = (fs::path(config.out_dir) / "checkpoint.bin").string();
  if (manifest_path.empty())
    manifest_path = (fs::path(config.out_dir) / "testsets" / "manifest.txt").string();

  ChannelStats stats;
  if (!config.normalization.empty()) {
    stats = config.normalization.stats();
  } else {
    std::fprintf(stderr,
                 "eval: config has no normalization stats; deriving them from the train split\n");
    stats = channel_stats(load_split(config.dataset, Split::Train));
  }
  BottleneckNet<float> model =
      build_model<float>(config.train.model, config.dataset.num_classes, config.train.seed);
  load_checkpoint(checkpoint_path, model);
  AccuracyGrid grid = run_grid(model, manifest_path, stats, worker_threads(opts));
  grid.model_id = fs::path(checkpoint_path).stem().string();

  fs::create_directories(config.out_dir);
  const std::string grid_path = (fs::path(config.out_dir) / "grid.csv").string();
  write_text_file(grid_path, emit_report(grid, ReportFormat::Csv));
  write_resolved_config(config);
  std::printf("eval: clean %.2f%%, 36-cell grid -> %s\n", grid.clean_accuracy * 100.0,
              grid_path.c_str());
  for (const TrendCheck& check : trend_checks(grid))
    std::printf("  trend %-28s %s\n", check.name.c_str(), check.pass ? "pass" : "FAIL");
  return 0;
}

int cmd_report(const std::string& grid_path, const std::string& baseline_path,
               const std::string& format, const std::string& out_path, bool show_trends) {
  const ReportFormat fmt = format == "csv" ? ReportFormat::Csv : ReportFormat::Markdown;
  AccuracyGrid grid = load_grid_csv(grid_path);
  std::string text;
  if (baseline_path.empty()) {
    text = emit_report(grid, fmt);
  } else {
    AccuracyGrid baseline = load_grid_csv(baseline_path);
    text = emit_report(compare(baseline, grid), fmt);
  }
  if (show_trends)
    for (const TrendCheck& check : trend_checks(grid))
      text += "trend " + check.name + ": " + (check.pass ? "pass" : "FAIL") + "\n";
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_text_file(out_path, text);
    std::printf("report: wrote %s\n", out_path.c_str());
  }
  return 0;
}

int cmd_synth(const std::string& out_dir, std::size_t train_count, std::size_t test_count,
              std::uint64_t seed, int classes) {
  SynthSpec spec;
  spec.seed = seed;
  spec.num_classes = classes;
  write_synthetic_cifar_dir(spec, train_count, test_count, out_dir);
  std::printf("synth: %zu train + %zu test records (%d classes, seed %llu) -> %s\n", train_count,
              test_count, classes, static_cast<unsigned long long>(seed), out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator_for_large_buffers();
  CLI::App app{
      "passband: CNN robustness to Gaussian high/low-pass filtering, at desk scale.\n"
      "Generates filtered test grids, trains a small bottleneck-residual CNN from\n"
      "scratch (optionally on a stochastically filtered, doubled train set), and\n"
      "emits accuracy-grid reports."};
  app.require_subcommand(1);

  CommonOpts common;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", common.config_path, "experiment config (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out", common.out_override, "override the config's out_dir");
    sub->add_option("--seed", common.seed_override, "override train and augment seeds");
    sub->add_option("--threads", common.threads,
                    "worker threads for filtering/eval (default: all cores)");
  };

  // filter
  std::string f_in, f_out, f_kind;
  double f_sigma = 1.0;
  int f_width = 3;
  CLI::App* filter = app.add_subcommand("filter", "filter one image (PPM/PGM in, PPM/PNG out)");
  filter->add_option("--in", f_in, "input image (binary PPM/PGM)")->required();
  filter->add_option("--out", f_out, "output image (.ppm/.pgm/.png)")->required();
  filter->add_option("--kind", f_kind, "high | low")->required();
  filter->add_option("--sigma", f_sigma, "Gaussian kernel sigma (pixels)")->required();
  filter->add_option("--width", f_width, "kernel width (tap count)")->required();

  CLI::App* gen = app.add_subcommand("gen-testsets",
                                     "write the filtered copies of the test set plus manifest");
  add_common(gen, true);

  CLI::App* aug = app.add_subcommand(
      "augment", "write the stochastically filtered, doubled train set plus provenance");
  add_common(aug, true);

  CLI::App* train_cmd = app.add_subcommand("train", "train the model per the config");
  add_common(train_cmd, true);

  std::string e_checkpoint, e_manifest;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint over a generated test-set grid");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", e_checkpoint,
                       "checkpoint path (default: out_dir/checkpoint.bin)");
  eval_cmd->add_option("--manifest", e_manifest,
                       "grid manifest (default: out_dir/testsets/manifest.txt)");

  std::string r_grid, r_baseline, r_format = "markdown", r_out;
  bool r_trends = false;
  CLI::App* report = app.add_subcommand("report", "render a grid CSV (or baseline comparison)");
  report->add_option("--grid", r_grid, "grid CSV to render")->required();
  report->add_option("--baseline", r_baseline, "baseline grid CSV for a comparison report");
  report->add_option("--format", r_format, "csv | markdown")
      ->check(CLI::IsMember({"csv", "markdown"}));
  report->add_option("--out", r_out, "output file (default: stdout)");
  report->add_flag("--trends", r_trends, "append trend-check results");

  std::string s_out;
  std::size_t s_train = 5000, s_test = 1000;
  std::uint64_t s_seed = 1;
  int s_classes = 10;
  CLI::App* synth = app.add_subcommand(
      "synth", "write a synthetic dataset in the CIFAR-10 binary directory layout");
  synth->add_option("--out", s_out, "output directory")->required();
  synth->add_option("--train", s_train, "train record count");
  synth->add_option("--test", s_test, "test record count");
  synth->add_option("--seed", s_seed, "generator seed");
  synth->add_option("--classes", s_classes, "class count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (filter->parsed()) return cmd_filter(f_in, f_out, f_kind, f_sigma, f_width);
    if (gen->parsed()) return cmd_gen_testsets(common);
    if (aug->parsed()) return cmd_augment(common);
    if (train_cmd->parsed()) return cmd_train(common);
    if (eval_cmd->parsed()) return cmd_eval(common, e_checkpoint, e_manifest);
    if (report->parsed()) return cmd_report(r_grid, r_baseline, r_format, r_out, r_trends);
    if (synth->parsed()) return cmd_synth(s_out, s_train, s_test, s_seed, s_classes);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
