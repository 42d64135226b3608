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
#include "passband/image_io.hpp"

#include <gtest/gtest.h>

#include <fstream>

#include "passband/rng.hpp"
#include "support/tmpdir.hpp"

namespace passband {
namespace {

ImageU8 random_u8(int h, int w, int c, std::uint64_t seed) {
  ImageU8 img(h, w, c);
  Rng rng(seed);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

TEST(ImageIo, PpmRoundTrip) {
  testing::TmpDir tmp("ppm");
  ImageU8 img = random_u8(5, 7, 3, 1);
  write_image(tmp.file("x.ppm"), img);
  ImageU8 back = read_pnm(tmp.file("x.ppm"));
  EXPECT_EQ(back.height, 5);
  EXPECT_EQ(back.width, 7);
  EXPECT_EQ(back.channels, 3);
  EXPECT_EQ(back.data, img.data);
}

TEST(ImageIo, PgmRoundTripSingleChannel) {
  testing::TmpDir tmp("pgm");
  ImageU8 img = random_u8(3, 4, 1, 2);
  write_image(tmp.file("g.pgm"), img);
  ImageU8 back = read_pnm(tmp.file("g.pgm"));
  EXPECT_EQ(back.channels, 1);
  EXPECT_EQ(back.data, img.data);
}

TEST(ImageIo, ReadPnmSkipsComments) {
  testing::TmpDir tmp("comments");
  std::ofstream f(tmp.file("c.ppm"), std::ios::binary);
  f << "P6\n# a comment line\n2 1\n# another\n255\n";
  f.write("\x01\x02\x03\x04\x05\x06", 6);
  f.close();
  ImageU8 img = read_pnm(tmp.file("c.ppm"));
  EXPECT_EQ(img.width, 2);
  EXPECT_EQ(img.height, 1);
  EXPECT_EQ(img.data[img.index(0, 0, 0)], 1);
  EXPECT_EQ(img.data[img.index(2, 0, 1)], 6);
}

TEST(ImageIo, PngHasValidSignatureAndChunks) {
  testing::TmpDir tmp("png");
  ImageU8 img = random_u8(9, 4, 3, 3);
  write_image(tmp.file("x.png"), img);
  auto bytes = testing::slurp(tmp.file("x.png"));
  ASSERT_GE(bytes.size(), 8u + 25u + 12u);
  const unsigned char sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  for (int i = 0; i < 8; ++i) ASSERT_EQ(bytes[i], sig[i]);
  // IHDR geometry is big-endian at offsets 16..23.
  auto be32 = [&](std::size_t off) {
    return (bytes[off] << 24) | (bytes[off + 1] << 16) | (bytes[off + 2] << 8) | bytes[off + 3];
  };
  EXPECT_EQ(be32(16), 4);  // width
  EXPECT_EQ(be32(20), 9);  // height
  // File ends with an IEND chunk.
  std::string tail(bytes.end() - 8, bytes.end() - 4);
  EXPECT_EQ(tail, "IEND");
}

TEST(ImageIo, RejectsUnknownExtension) {
  ImageU8 img = random_u8(2, 2, 3, 4);
  EXPECT_THROW(write_image("/tmp/passband_bogus.jpg", img), std::invalid_argument);
}

TEST(ImageIo, MissingFileIsIoError) {
  EXPECT_THROW(read_pnm("/nonexistent/path/x.ppm"), io_error);
}

TEST(ImageIo, ToUnitScalesBytes) {
  ImageU8 img(1, 2, 1);
  img.data = {0, 255};
  ImageTensor t = to_unit(img);
  EXPECT_DOUBLE_EQ(t.data[0], 0.0);
  EXPECT_DOUBLE_EQ(t.data[1], 1.0);
}

}  // namespace
}  // namespace passband
