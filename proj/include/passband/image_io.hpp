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

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "passband/errors.hpp"
#include "passband/image.hpp"

namespace passband {

namespace detail {

inline void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void png_chunk(std::vector<std::uint8_t>& out, const char type[4],
                      const std::uint8_t* data, std::size_t len) {
  put_be32(out, static_cast<std::uint32_t>(len));
  std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data, data + len);
  std::uint32_t crc = ::crc32(0, out.data() + crc_start, static_cast<uInt>(4 + len));
  put_be32(out, crc);
}

// Planar channel layout -> interleaved scanlines.
inline std::vector<std::uint8_t> interleave(const ImageU8& img) {
  std::vector<std::uint8_t> out(img.data.size());
  const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
  std::size_t p = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out[p++] = img.data[c * plane + static_cast<std::size_t>(y) * img.width + x];
  return out;
}

}  // namespace detail

inline void write_png(const std::string& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_png: only 1- or 3-channel images");
  std::vector<std::uint8_t> file;
  static const std::uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  file.insert(file.end(), sig, sig + 8);

  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>(img.width >> 24);
  ihdr[1] = static_cast<std::uint8_t>(img.width >> 16);
  ihdr[2] = static_cast<std::uint8_t>(img.width >> 8);
  ihdr[3] = static_cast<std::uint8_t>(img.width);
  ihdr[4] = static_cast<std::uint8_t>(img.height >> 24);
  ihdr[5] = static_cast<std::uint8_t>(img.height >> 16);
  ihdr[6] = static_cast<std::uint8_t>(img.height >> 8);
  ihdr[7] = static_cast<std::uint8_t>(img.height);
  ihdr[8] = 8;                                      // bit depth
  ihdr[9] = img.channels == 3 ? 2 : 0;              // truecolor / grayscale
  ihdr[10] = ihdr[11] = ihdr[12] = 0;               // deflate, adaptive, no interlace
  detail::png_chunk(file, "IHDR", ihdr, 13);

  // Raw stream: one filter byte (None) per scanline, then interleaved pixels.
  std::vector<std::uint8_t> pixels = detail::interleave(img);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), pixels.begin() + y * stride, pixels.begin() + (y + 1) * stride);
  }
  uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (::compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw io_error("write_png: deflate failed");
  detail::png_chunk(file, "IDAT", compressed.data(), bound);
  detail::png_chunk(file, "IEND", nullptr, 0);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + path);
  f.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
  if (!f) throw io_error("short write: " + path);
}

inline void write_pnm(const std::string& path, const ImageU8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_pnm: only 1- or 3-channel images");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + path);
  f << (img.channels == 3 ? "P6" : "P5") << "\n"
    << img.width << " " << img.height << "\n255\n";
  std::vector<std::uint8_t> pixels = detail::interleave(img);
  f.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
  if (!f) throw io_error("short write: " + path);
}

/// Writes an 8-bit image; the format is chosen by file extension
/// (.ppm/.pgm or .png).
inline void write_image(const std::string& path, const ImageU8& img) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".png") {
    write_png(path, img);
  } else if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    write_pnm(path, img);
  } else {
    throw std::invalid_argument("write_image: unsupported extension '" + ext +
                                "' (use .ppm, .pgm, or .png)");
  }
}

/// Reads a binary PGM (P5) or PPM (P6) file.
inline ImageU8 read_pnm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path);
  auto next_token = [&f, &path]() -> std::string {
    std::string tok;
    int ch;
    while ((ch = f.get()) != EOF) {
      if (ch == '#') {  // comment to end of line
        while ((ch = f.get()) != EOF && ch != '\n') {
        }
        continue;
      }
      if (std::isspace(ch)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw format_error("truncated PNM header: " + path);
    return tok;
  };
  std::string magic = next_token();
  int channels;
  if (magic == "P6")
    channels = 3;
  else if (magic == "P5")
    channels = 1;
  else
    throw format_error("not a binary PGM/PPM file: " + path);
  int w = std::stoi(next_token());
  int h = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval != 255)
    throw format_error("unsupported PNM geometry (need maxval 255): " + path);
  // The header terminator is the single whitespace already consumed.
  ImageU8 img(h, w, channels);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * channels);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!f) throw format_error("truncated PNM pixel data: " + path);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img.data[c * plane + static_cast<std::size_t>(y) * w + x] = row[x * channels + c];
  }
  return img;
}

/// Bytes -> unit-range doubles.
inline ImageTensor to_unit(const ImageU8& img) {
  ImageTensor out(img.height, img.width, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) out.data[i] = img.data[i] / 255.0;
  return out;
}

}  // namespace passband
