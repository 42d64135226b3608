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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "passband/errors.hpp"
#include "passband/image.hpp"

namespace passband {

struct LabeledItem {
  ImageTensor image;
  int label = 0;
};

/// Ordered collection of (image, class index) pairs. All images share one
/// geometry and every label lies in [0, num_classes).
struct LabeledDataset {
  std::vector<LabeledItem> items;
  int num_classes = 0;
  std::string name;

  std::size_t size() const { return items.size(); }
};

inline void check_dataset(const LabeledDataset& ds, const char* where) {
  if (ds.num_classes <= 0) throw std::invalid_argument(std::string(where) + ": num_classes must be positive");
  for (const auto& item : ds.items) {
    if (item.label < 0 || item.label >= ds.num_classes)
      throw std::invalid_argument(std::string(where) + ": label out of range");
    if (!item.image.same_shape(ds.items.front().image))
      throw shape_error(std::string(where) + ": images differ in shape");
  }
}

/// How pixel doubles map to the 8-bit record format.
///   Unsigned: v in [0,1]   <-> byte v*255
///   Signed:   v in [-1,1]  <-> byte (v*0.5+0.5)*255, zero at mid-grey.
/// Signed is used when persisting high-pass output.
enum class PixelEncoding { Unsigned, Signed };

inline const char* to_string(PixelEncoding e) {
  return e == PixelEncoding::Unsigned ? "unsigned" : "signed";
}

inline PixelEncoding pixel_encoding_from_string(const std::string& s) {
  if (s == "unsigned") return PixelEncoding::Unsigned;
  if (s == "signed") return PixelEncoding::Signed;
  throw std::invalid_argument("unknown pixel encoding: " + s);
}

inline double decode_pixel(std::uint8_t b, PixelEncoding enc) {
  return enc == PixelEncoding::Unsigned ? b / 255.0 : b / 127.5 - 1.0;
}

inline std::uint8_t encode_pixel(double v, PixelEncoding enc) {
  return quantize_unit_u8(enc == PixelEncoding::Unsigned ? v : v * 0.5 + 0.5);
}

/// Loads a file of fixed-size records: one label byte followed by
/// channels*height*width pixel bytes as channel planes (CIFAR-10 binary
/// layout when 32x32x3). Empty files and trailing partial records are
/// format errors, as are labels outside [0, num_classes).
inline LabeledDataset load_record_file(const std::string& path, int num_classes,
                                       PixelEncoding encoding = PixelEncoding::Unsigned,
                                       int height = 32, int width = 32, int channels = 3,
                                       std::size_t limit = 0) {
  if (num_classes <= 0) throw std::invalid_argument("load_record_file: num_classes must be positive");
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw io_error("dataset file not found: " + path);
  const std::streamoff file_size = f.tellg();
  f.seekg(0);
  const std::size_t record = 1 + static_cast<std::size_t>(height) * width * channels;
  if (file_size == 0 || static_cast<std::size_t>(file_size) % record != 0)
    throw format_error(path + ": size " + std::to_string(file_size) +
                       " is not a positive multiple of record size " + std::to_string(record));
  std::size_t count = static_cast<std::size_t>(file_size) / record;
  if (limit != 0 && limit < count) count = limit;

  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.name = std::filesystem::path(path).stem().string();
  ds.items.reserve(count);
  std::vector<std::uint8_t> buf(record);
  for (std::size_t r = 0; r < count; ++r) {
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(record));
    if (!f) throw format_error(path + ": truncated read");
    if (buf[0] >= num_classes)
      throw format_error(path + ": label byte " + std::to_string(buf[0]) +
                         " out of range [0, " + std::to_string(num_classes) + ")");
    LabeledItem item;
    item.label = buf[0];
    item.image = ImageTensor(height, width, channels);
    for (std::size_t i = 0; i < record - 1; ++i)
      item.image.data[i] = decode_pixel(buf[1 + i], encoding);
    ds.items.push_back(std::move(item));
  }
  return ds;
}

/// Writes the same record layout, quantizing pixels to 8 bits under the
/// chosen encoding. Quantization is idempotent: save(load(f)) == f.
inline void save_record_file(const std::string& path, const LabeledDataset& ds,
                             PixelEncoding encoding = PixelEncoding::Unsigned) {
  check_dataset(ds, "save_record_file");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + path);
  std::vector<std::uint8_t> buf;
  for (const auto& item : ds.items) {
    buf.clear();
    buf.push_back(static_cast<std::uint8_t>(item.label));
    for (double v : item.image.data) buf.push_back(encode_pixel(v, encoding));
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!f) throw io_error("short write: " + path);
}

enum class Split { Train, Test };

/// Loads the CIFAR-10 binary batches from a directory: the train split is
/// the concatenation of data_batch_1..5.bin in numeric order, the test split
/// is test_batch.bin. Pixels land in [0, 1]. `limit` (0 = all) keeps the
/// first N records. Any dataset in the same record layout works; pass its
/// class count.
inline LabeledDataset load_cifar10(const std::string& dir, Split split, std::size_t limit = 0,
                                   int num_classes = 10) {
  std::vector<std::string> files;
  if (split == Split::Train) {
    for (int i = 1; i <= 5; ++i)
      files.push_back((std::filesystem::path(dir) / ("data_batch_" + std::to_string(i) + ".bin")).string());
  } else {
    files.push_back((std::filesystem::path(dir) / "test_batch.bin").string());
  }
  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.name = split == Split::Train ? "cifar10-train" : "cifar10-test";
  for (const auto& file : files) {
    std::size_t remaining = limit == 0 ? 0 : limit - ds.items.size();
    LabeledDataset part =
        load_record_file(file, num_classes, PixelEncoding::Unsigned, 32, 32, 3, remaining);
    for (auto& item : part.items) ds.items.push_back(std::move(item));
    if (limit != 0 && ds.items.size() >= limit) break;
  }
  return ds;
}

/// Keeps the first `limit` items (0 = no-op).
inline LabeledDataset head(LabeledDataset ds, std::size_t limit) {
  if (limit != 0 && ds.items.size() > limit) ds.items.resize(limit);
  return ds;
}

}  // namespace passband
