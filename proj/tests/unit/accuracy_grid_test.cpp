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
#include "passband/accuracy_grid.hpp"

#include <gtest/gtest.h>

#include "passband/synth.hpp"
#include "support/tmpdir.hpp"

namespace passband {
namespace {

AccuracyGrid uniform_grid(double accuracy, double clean) {
  AccuracyGrid grid;
  grid.clean_accuracy = clean;
  GridSpec spec;
  for (const FilterSpec& cell : spec.cells())
    grid.cells[CellKey{cell.kind, cell.sigma, cell.width}] = accuracy;
  return grid;
}

AccuracyGrid baseline_reference() { return load_grid_csv(PASSBAND_DATA_DIR "/ref_resnet50_cifar10_baseline.csv"); }
AccuracyGrid augmented_reference() { return load_grid_csv(PASSBAND_DATA_DIR "/ref_resnet50_cifar10_stochastic_aug.csv"); }

TEST(GridCsv, ReferenceFilesParse) {
  AccuracyGrid base = baseline_reference();
  EXPECT_EQ(base.cells.size(), 36u);
  EXPECT_NEAR(base.clean_accuracy, 0.9495, 1e-9);
  EXPECT_NEAR(base.at(FilterKind::HighPass, 0.5, 2), 0.5813, 1e-9);
  EXPECT_NEAR(base.at(FilterKind::LowPass, 1.5, 7), 0.1614, 1e-9);
  EXPECT_EQ(base.model_id, "resnet50-cifar10-baseline");
  EXPECT_TRUE(base.complete());
}

TEST(GridCsv, EmitParseRoundTrip) {
  AccuracyGrid grid = baseline_reference();
  std::string csv = emit_report(grid, ReportFormat::Csv);
  EXPECT_NE(csv.find("kind,sigma,width,accuracy\n"), std::string::npos);
  EXPECT_NE(csv.find("LowPass,0.5,2,93.89\n"), std::string::npos);
  AccuracyGrid back = parse_grid_csv(csv);
  ASSERT_EQ(back.cells.size(), grid.cells.size());
  EXPECT_NEAR(back.clean_accuracy, grid.clean_accuracy, 5e-5);
  for (const auto& [key, acc] : grid.cells) EXPECT_NEAR(back.cells.at(key), acc, 5e-5);
}

TEST(GridCsv, RejectsIncompleteInput) {
  EXPECT_THROW(parse_grid_csv("kind,sigma,width,accuracy\n"), format_error);
  EXPECT_THROW(parse_grid_csv("bogus\n"), format_error);
  AccuracyGrid partial;
  partial.clean_accuracy = 0.5;
  partial.cells[CellKey{FilterKind::HighPass, 0.5, 2}] = 0.4;
  partial.cells[CellKey{FilterKind::LowPass, 1.0, 3}] = 0.4;
  EXPECT_THROW(emit_report(partial, ReportFormat::Csv), std::invalid_argument);
}

TEST(Markdown, LayoutMatchesPublishedTables) {
  AccuracyGrid grid = baseline_reference();
  std::string md = emit_report(grid, ReportFormat::Markdown);
  EXPECT_NE(md.find("Clean accuracy: 94.95%"), std::string::npos);
  EXPECT_EQ(std::count(md.begin(), md.end(), '#') / 3, 2);  // two "###" table headers
  EXPECT_NE(md.find("### High Pass"), std::string::npos);
  EXPECT_NE(md.find("### Low Pass"), std::string::npos);
  // 2 header rows + 2 separator rows + 2 kinds x 3 sigma rows.
  EXPECT_EQ(std::count(md.begin(), md.end(), '\n') - 8, 2 + 2 + 6);
  // Each sigma row has 6 width columns: 8 pipes per data row.
  std::istringstream in(md);
  std::string line;
  int data_rows = 0;
  while (std::getline(in, line))
    if (line.rfind("| 0.5 |", 0) == 0 || line.rfind("| 1 |", 0) == 0 ||
        line.rfind("| 1.5 |", 0) == 0) {
      EXPECT_EQ(std::count(line.begin(), line.end(), '|'), 8) << line;
      ++data_rows;
    }
  EXPECT_EQ(data_rows, 6);
  EXPECT_NE(md.find("58.13"), std::string::npos);
}

TEST(TrendChecks, PublishedBaselineValuesPassAll) {
  std::vector<TrendCheck> checks = trend_checks(baseline_reference(), 2.0);
  ASSERT_EQ(checks.size(), 4u);
  for (const TrendCheck& c : checks) EXPECT_TRUE(c.pass) << c.name << ": " << c.details;
}

TEST(TrendChecks, UniformGridPassesWithSlack) {
  for (const TrendCheck& c : trend_checks(uniform_grid(0.42, 0.42), 2.0))
    EXPECT_TRUE(c.pass) << c.name;
}

TEST(TrendChecks, RisingHighPassWidthFails) {
  AccuracyGrid grid = uniform_grid(0.40, 0.80);
  // High-pass accuracy rising 10 points from the narrowest to widest kernel.
  for (double sigma : {0.5, 1.0, 1.5}) {
    grid.cells[CellKey{FilterKind::HighPass, sigma, 2}] = 0.40;
    grid.cells[CellKey{FilterKind::HighPass, sigma, 7}] = 0.50;
  }
  std::vector<TrendCheck> checks = trend_checks(grid, 2.0);
  EXPECT_FALSE(checks[0].pass) << checks[0].details;
}

TEST(TrendChecks, IncompleteGridRejected) {
  AccuracyGrid grid = uniform_grid(0.4, 0.5);
  grid.cells.erase(CellKey{FilterKind::HighPass, 0.5, 2});
  EXPECT_THROW(trend_checks(grid), std::invalid_argument);
}

TEST(Compare, IdenticalGridsHaveZeroDeltas) {
  AccuracyGrid grid = baseline_reference();
  GridComparison cmp = compare(grid, grid);
  EXPECT_EQ(cmp.clean_delta, 0.0);
  for (const auto& [key, delta] : cmp.deltas) EXPECT_EQ(delta, 0.0);
  EXPECT_EQ(cmp.mean_delta, 0.0);
}

TEST(Compare, DeltasAreAntisymmetric) {
  GridComparison fwd = compare(baseline_reference(), augmented_reference());
  GridComparison rev = compare(augmented_reference(), baseline_reference());
  for (const auto& [key, delta] : fwd.deltas) EXPECT_NEAR(rev.deltas.at(key), -delta, 1e-12);
  EXPECT_NEAR(rev.clean_delta, -fwd.clean_delta, 1e-12);
}

TEST(Compare, PublishedGridsGiveKnownDeltas) {
  GridComparison cmp = compare(baseline_reference(), augmented_reference());
  // (HighPass, sigma=1, width=7): 14.04 -> 84.87.
  EXPECT_NEAR(cmp.deltas.at(CellKey{FilterKind::HighPass, 1.0, 7}) * 100.0, 70.83, 1e-9);
  // Clean: 94.95 -> 93.94.
  EXPECT_NEAR(cmp.clean_delta * 100.0, -1.01, 1e-9);
  EXPECT_GT(cmp.mean_delta, 0.10);
}

TEST(Compare, MismatchedKeysRejected) {
  AccuracyGrid a = uniform_grid(0.4, 0.5);
  AccuracyGrid b = a;
  b.cells.erase(CellKey{FilterKind::LowPass, 1.5, 7});
  b.cells[CellKey{FilterKind::LowPass, 1.5, 9}] = 0.4;
  EXPECT_THROW(compare(a, b), std::invalid_argument);
}

TEST(ComparisonReport, CsvCarriesDeltaColumn) {
  GridComparison cmp = compare(baseline_reference(), augmented_reference());
  std::string csv = emit_report(cmp, ReportFormat::Csv);
  EXPECT_NE(csv.find("kind,sigma,width,accuracy,delta\n"), std::string::npos);
  EXPECT_NE(csv.find("HighPass,1,7,84.87,70.83\n"), std::string::npos);
  EXPECT_NE(csv.find("Clean,0,0,93.94,-1.01\n"), std::string::npos);
  std::string md = emit_report(cmp, ReportFormat::Markdown);
  EXPECT_NE(md.find("84.87 (+70.83)"), std::string::npos);
}

TEST(RunGrid, ConstantModelScoresClassFrequencyEverywhere) {
  testing::TmpDir tmp("rungrid");
  SynthSpec spec;
  spec.seed = 5;
  LabeledDataset test = make_synthetic_dataset(spec, 20, "test");  // balanced: 2 per class
  generate_test_grid(test, GridSpec{}, tmp.path().string());

  BottleneckNet<float> net = build_model<float>("desk", 10, 1);
  for (auto& p : net.params()) std::fill(p.value->begin(), p.value->end(), 0.0f);
  net.fc.bias[3] = 1.0f;  // constant prediction: class 3
  ChannelStats stats{{0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}};

  AccuracyGrid grid = run_grid(net, tmp.file("manifest.txt"), stats);
  EXPECT_DOUBLE_EQ(grid.clean_accuracy, 0.1);
  ASSERT_EQ(grid.cells.size(), 36u);
  int high = 0, low = 0;
  for (const auto& [key, acc] : grid.cells) {
    EXPECT_DOUBLE_EQ(acc, 0.1);
    (key.kind == FilterKind::HighPass ? high : low)++;
  }
  EXPECT_EQ(high, 18);
  EXPECT_EQ(low, 18);
}

TEST(RunGrid, IdempotentAndThreadCountInvariant) {
  testing::TmpDir tmp("rungrid2");
  SynthSpec spec;
  spec.seed = 6;
  LabeledDataset test = make_synthetic_dataset(spec, 10, "test");
  generate_test_grid(test, GridSpec{}, tmp.path().string());
  BottleneckNet<float> net = build_model<float>("desk", 10, 2);
  ChannelStats stats{{0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}};
  AccuracyGrid a = run_grid(net, tmp.file("manifest.txt"), stats, 1);
  AccuracyGrid b = run_grid(net, tmp.file("manifest.txt"), stats, 1);
  AccuracyGrid c = run_grid(net, tmp.file("manifest.txt"), stats, 3);
  EXPECT_EQ(a.clean_accuracy, b.clean_accuracy);
  EXPECT_EQ(a.clean_accuracy, c.clean_accuracy);
  for (const auto& [key, acc] : a.cells) {
    EXPECT_EQ(b.cells.at(key), acc);
    EXPECT_EQ(c.cells.at(key), acc);
  }
}

TEST(RunGrid, MissingCellDatasetNamesTheCell) {
  testing::TmpDir tmp("rungrid3");
  SynthSpec spec;
  LabeledDataset test = make_synthetic_dataset(spec, 10, "test");
  generate_test_grid(test, GridSpec{}, tmp.path().string());
  std::filesystem::remove(tmp.path() / "highpass_s1_w4.bin");
  BottleneckNet<float> net = build_model<float>("desk", 10, 2);
  ChannelStats stats{{0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}};
  try {
    run_grid(net, tmp.file("manifest.txt"), stats);
    FAIL() << "expected io_error";
  } catch (const io_error& e) {
    std::string what = e.what();
    EXPECT_NE(what.find("HighPass"), std::string::npos) << what;
    EXPECT_NE(what.find("sigma=1"), std::string::npos) << what;
    EXPECT_NE(what.find("width=4"), std::string::npos) << what;
  }
}

}  // namespace
}  // namespace passband
