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
#include "passband/testgrid.hpp"

#include <gtest/gtest.h>

#include <fstream>

#include "passband/rng.hpp"
#include "support/tmpdir.hpp"

namespace passband {
namespace {

LabeledDataset small_dataset(int n, std::uint64_t seed) {
  LabeledDataset ds;
  ds.num_classes = 10;
  ds.name = "small";
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    LabeledItem item;
    item.label = i % 10;
    item.image = ImageTensor(32, 32, 3);
    for (double& v : item.image.data) v = rng.uniform01();
    ds.items.push_back(std::move(item));
  }
  return ds;
}

std::vector<unsigned char> dir_bytes(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<unsigned char> all;
  for (const auto& f : files) {
    auto b = testing::slurp(f.string());
    all.insert(all.end(), b.begin(), b.end());
  }
  return all;
}

TEST(GridSpec, DefaultGridHasThirtySixCells) {
  GridSpec grid;
  auto cells = grid.cells();
  EXPECT_EQ(cells.size(), 36u);
  int high = 0, low = 0;
  for (const auto& c : cells) (c.kind == FilterKind::HighPass ? high : low)++;
  EXPECT_EQ(high, 18);
  EXPECT_EQ(low, 18);
}

TEST(GridSpec, RejectsEmptyAxes) {
  GridSpec grid;
  grid.sigmas.clear();
  EXPECT_THROW(grid.validate(), std::invalid_argument);
}

TEST(GenerateTestGrid, ManifestCoversCrossProductPlusClean) {
  testing::TmpDir tmp("grid");
  LabeledDataset ds = small_dataset(12, 1);
  Manifest manifest = generate_test_grid(ds, GridSpec{}, tmp.path().string());
  ASSERT_EQ(manifest.entries.size(), 37u);
  EXPECT_TRUE(manifest.entries.front().is_clean());
  int high = 0, low = 0;
  for (const auto& e : manifest.entries) {
    EXPECT_EQ(e.count, 12u);
    if (e.kind == "HighPass") {
      ++high;
      EXPECT_EQ(e.encoding, PixelEncoding::Signed);
    } else if (e.kind == "LowPass") {
      ++low;
      EXPECT_EQ(e.encoding, PixelEncoding::Unsigned);
    }
    EXPECT_TRUE(std::filesystem::exists(tmp.path() / e.path)) << e.path;
  }
  EXPECT_EQ(high, 18);
  EXPECT_EQ(low, 18);
}

TEST(GenerateTestGrid, CellPreservesLabelsAndAppliesFilter) {
  testing::TmpDir tmp("cell");
  LabeledDataset ds = small_dataset(8, 2);
  Manifest manifest = generate_test_grid(ds, GridSpec{}, tmp.path().string());

  const ManifestEntry* cell = nullptr;
  for (const auto& e : manifest.entries)
    if (e.kind == "LowPass" && e.sigma == 0.5 && e.width == 2) cell = &e;
  ASSERT_NE(cell, nullptr);

  LabeledDataset loaded = load_record_file((tmp.path() / cell->path).string(), 10,
                                           cell->encoding, 32, 32, 3);
  ASSERT_EQ(loaded.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    ASSERT_EQ(loaded.items[i].label, ds.items[i].label);

  // Cell image 0 equals filter_lowpass(image 0) up to the 8-bit export step.
  ImageTensor expected = filter_lowpass(ds.items[0].image, 0.5, 2);
  for (std::size_t i = 0; i < expected.data.size(); ++i) {
    double quantized = decode_pixel(encode_pixel(expected.data[i], PixelEncoding::Unsigned),
                                    PixelEncoding::Unsigned);
    ASSERT_DOUBLE_EQ(loaded.items[0].image.data[i], quantized);
  }
}

TEST(GenerateTestGrid, DeterministicAcrossRunsAndThreadCounts) {
  LabeledDataset ds = small_dataset(10, 3);
  testing::TmpDir a("det_a"), b("det_b"), c("det_c");
  generate_test_grid(ds, GridSpec{}, a.path().string(), 1);
  generate_test_grid(ds, GridSpec{}, b.path().string(), 1);
  generate_test_grid(ds, GridSpec{}, c.path().string(), 3);
  EXPECT_EQ(dir_bytes(a.path()), dir_bytes(b.path()));
  EXPECT_EQ(dir_bytes(a.path()), dir_bytes(c.path()));
}

TEST(Manifest, WriteReadRoundTrip) {
  testing::TmpDir tmp("manifest");
  Manifest m;
  m.entries.push_back(ManifestEntry{"Clean", 0.0, 0, 100, "clean.bin", PixelEncoding::Unsigned});
  m.entries.push_back(ManifestEntry{"HighPass", 0.5, 2, 100, "highpass_s0.5_w2.bin", PixelEncoding::Signed});
  write_manifest(tmp.file("manifest.txt"), m);
  Manifest back = read_manifest(tmp.file("manifest.txt"));
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.entries[0].kind, "Clean");
  EXPECT_EQ(back.entries[1].kind, "HighPass");
  EXPECT_DOUBLE_EQ(back.entries[1].sigma, 0.5);
  EXPECT_EQ(back.entries[1].width, 2);
  EXPECT_EQ(back.entries[1].count, 100u);
  EXPECT_EQ(back.entries[1].path, "highpass_s0.5_w2.bin");
  EXPECT_EQ(back.entries[1].encoding, PixelEncoding::Signed);
}

TEST(Manifest, UnknownFieldIsFormatError) {
  testing::TmpDir tmp("badmanifest");
  std::ofstream f(tmp.file("m.txt"));
  f << "kind=Clean\nbogus=1\n";
  f.close();
  EXPECT_THROW(read_manifest(tmp.file("m.txt")), format_error);
}

}  // namespace
}  // namespace passband
