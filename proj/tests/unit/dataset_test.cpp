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
#include "passband/dataset.hpp"

#include <gtest/gtest.h>

#include <fstream>

#include "passband/rng.hpp"
#include "support/tmpdir.hpp"

namespace passband {
namespace {

void write_record(std::ofstream& f, std::uint8_t label, std::uint8_t fill) {
  f.put(static_cast<char>(label));
  std::vector<char> pixels(3072, static_cast<char>(fill));
  f.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
}

TEST(LoadRecordFile, SingleCraftedRecord) {
  testing::TmpDir tmp("single");
  {
    std::ofstream f(tmp.file("one.bin"), std::ios::binary);
    write_record(f, 3, 255);
  }
  LabeledDataset ds = load_record_file(tmp.file("one.bin"), 10);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.items[0].label, 3);
  for (double v : ds.items[0].image.data) ASSERT_DOUBLE_EQ(v, 1.0);
}

TEST(LoadRecordFile, EmptyFileIsFormatError) {
  testing::TmpDir tmp("empty");
  std::ofstream(tmp.file("z.bin"), std::ios::binary).close();
  EXPECT_THROW(load_record_file(tmp.file("z.bin"), 10), format_error);
}

TEST(LoadRecordFile, TruncatedRecordIsFormatError) {
  testing::TmpDir tmp("trunc");
  {
    std::ofstream f(tmp.file("t.bin"), std::ios::binary);
    std::vector<char> partial(3072, 0);  // missing one byte of a full record
    f.write(partial.data(), static_cast<std::streamsize>(partial.size()));
  }
  EXPECT_THROW(load_record_file(tmp.file("t.bin"), 10), format_error);
}

TEST(LoadRecordFile, LabelOutOfRangeIsFormatError) {
  testing::TmpDir tmp("label");
  {
    std::ofstream f(tmp.file("l.bin"), std::ios::binary);
    write_record(f, 10, 0);
  }
  EXPECT_THROW(load_record_file(tmp.file("l.bin"), 10), format_error);
}

TEST(LoadRecordFile, MissingFileIsIoError) {
  EXPECT_THROW(load_record_file("/nonexistent/x.bin", 10), io_error);
}

TEST(LoadCifar10, TrainConcatenatesBatchesInOrder) {
  testing::TmpDir tmp("cifar");
  for (int i = 1; i <= 5; ++i) {
    std::ofstream f(tmp.file("data_batch_" + std::to_string(i) + ".bin"), std::ios::binary);
    write_record(f, static_cast<std::uint8_t>(i - 1), static_cast<std::uint8_t>(10 * i));
    write_record(f, static_cast<std::uint8_t>(i - 1), static_cast<std::uint8_t>(10 * i));
  }
  LabeledDataset ds = load_cifar10(tmp.path().string(), Split::Train);
  ASSERT_EQ(ds.size(), 10u);
  EXPECT_EQ(ds.num_classes, 10);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(ds.items[i].label, i / 2);
  EXPECT_DOUBLE_EQ(ds.items[0].image.data[0], 10.0 / 255.0);
  EXPECT_DOUBLE_EQ(ds.items[9].image.data[0], 50.0 / 255.0);
}

TEST(LoadCifar10, LimitStopsEarly) {
  testing::TmpDir tmp("limit");
  for (int i = 1; i <= 5; ++i) {
    std::ofstream f(tmp.file("data_batch_" + std::to_string(i) + ".bin"), std::ios::binary);
    write_record(f, 1, 0);
    write_record(f, 2, 0);
  }
  LabeledDataset ds = load_cifar10(tmp.path().string(), Split::Train, 3);
  ASSERT_EQ(ds.size(), 3u);
}

TEST(LoadCifar10, TestSplitReadsTestBatch) {
  testing::TmpDir tmp("test");
  {
    std::ofstream f(tmp.file("test_batch.bin"), std::ios::binary);
    write_record(f, 7, 42);
  }
  LabeledDataset ds = load_cifar10(tmp.path().string(), Split::Test);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.items[0].label, 7);
}

TEST(SaveRecordFile, RoundTripIsIdempotentAt8Bits) {
  testing::TmpDir tmp("round");
  LabeledDataset ds;
  ds.num_classes = 10;
  Rng rng(123);
  for (int i = 0; i < 5; ++i) {
    LabeledItem item;
    item.label = static_cast<int>(rng.below(10));
    item.image = ImageTensor(32, 32, 3);
    for (double& v : item.image.data) v = rng.uniform01();
    ds.items.push_back(std::move(item));
  }
  save_record_file(tmp.file("a.bin"), ds);
  LabeledDataset loaded = load_record_file(tmp.file("a.bin"), 10);
  save_record_file(tmp.file("b.bin"), loaded);
  EXPECT_EQ(testing::slurp(tmp.file("a.bin")), testing::slurp(tmp.file("b.bin")));
  for (std::size_t i = 0; i < ds.items.size(); ++i)
    EXPECT_EQ(loaded.items[i].label, ds.items[i].label);
}

TEST(SaveRecordFile, SignedEncodingRoundTrips) {
  testing::TmpDir tmp("signed");
  LabeledDataset ds;
  ds.num_classes = 2;
  LabeledItem item;
  item.label = 1;
  item.image = ImageTensor(4, 4, 3);
  Rng rng(9);
  for (double& v : item.image.data) v = rng.uniform(-1.0, 1.0);
  ds.items.push_back(item);
  save_record_file(tmp.file("s.bin"), ds, PixelEncoding::Signed);
  LabeledDataset loaded = load_record_file(tmp.file("s.bin"), 2, PixelEncoding::Signed, 4, 4, 3);
  // One quantization step of the signed mapping: |error| <= 1/255.
  for (std::size_t i = 0; i < item.image.data.size(); ++i)
    ASSERT_NEAR(loaded.items[0].image.data[i], item.image.data[i], 1.0 / 255.0);
  // Zero must survive exactly as mid-grey.
  item.image.data.assign(item.image.data.size(), 0.0);
  ds.items[0] = item;
  save_record_file(tmp.file("z.bin"), ds, PixelEncoding::Signed);
  LabeledDataset zero = load_record_file(tmp.file("z.bin"), 2, PixelEncoding::Signed, 4, 4, 3);
  for (double v : zero.items[0].image.data) ASSERT_NEAR(v, 128.0 / 127.5 - 1.0, 1e-15);
}

TEST(CheckDataset, RejectsBadLabelsAndShapes) {
  LabeledDataset ds;
  ds.num_classes = 3;
  LabeledItem a;
  a.label = 2;
  a.image = ImageTensor(2, 2, 1);
  ds.items.push_back(a);
  EXPECT_NO_THROW(check_dataset(ds, "test"));
  ds.items[0].label = 3;
  EXPECT_THROW(check_dataset(ds, "test"), std::invalid_argument);
  ds.items[0].label = 0;
  LabeledItem b;
  b.label = 0;
  b.image = ImageTensor(2, 3, 1);
  ds.items.push_back(b);
  EXPECT_THROW(check_dataset(ds, "test"), shape_error);
}

}  // namespace
}  // namespace passband
