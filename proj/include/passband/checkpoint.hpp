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

// Versioned binary checkpoint: magic, format version, config hash, epoch,
// RNG state, then one (name, dims, raw float32 values) entry per parameter
// and batch-norm running statistic, in the model's stable state order.
// Little-endian scalar layout.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "passband/errors.hpp"
#include "passband/model.hpp"

namespace passband {

inline constexpr char kCheckpointMagic[8] = {'P', 'B', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t config_hash = 0;
  std::uint32_t epoch = 0;
  std::uint64_t rng_state = 0;
};

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {

template <typename V>
void write_pod(std::ofstream& f, V v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename V>
V read_pod(std::ifstream& f, const std::string& path) {
  V v;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!f) throw format_error(path + ": truncated checkpoint");
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, BottleneckNet<float>& model,
                            const CheckpointMeta& meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open for writing: " + path);
  f.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod(f, kCheckpointVersion);
  detail::write_pod(f, meta.config_hash);
  detail::write_pod(f, meta.epoch);
  detail::write_pod(f, meta.rng_state);
  std::vector<ParamRef<float>> state = model.state();
  detail::write_pod(f, static_cast<std::uint32_t>(state.size()));
  for (const ParamRef<float>& ref : state) {
    detail::write_pod(f, static_cast<std::uint32_t>(ref.name.size()));
    f.write(ref.name.data(), static_cast<std::streamsize>(ref.name.size()));
    detail::write_pod(f, static_cast<std::uint32_t>(ref.dims.size()));
    for (int d : ref.dims) detail::write_pod(f, static_cast<std::uint32_t>(d));
    detail::write_pod(f, static_cast<std::uint64_t>(ref.value->size()));
    f.write(reinterpret_cast<const char*>(ref.value->data()),
            static_cast<std::streamsize>(ref.value->size() * sizeof(float)));
  }
  if (!f) throw io_error("short write: " + path);
}

/// Restores a checkpoint into a model already built with the matching
/// descriptor and class count. Entry names, order, and shapes must agree;
/// reload gives a bit-identical eval-mode forward pass.
inline CheckpointMeta load_checkpoint(const std::string& path, BottleneckNet<float>& model) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("checkpoint not found: " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw format_error(path + ": not a checkpoint file");
  const auto version = detail::read_pod<std::uint32_t>(f, path);
  if (version != kCheckpointVersion)
    throw format_error(path + ": unsupported checkpoint version " + std::to_string(version));
  CheckpointMeta meta;
  meta.config_hash = detail::read_pod<std::uint64_t>(f, path);
  meta.epoch = detail::read_pod<std::uint32_t>(f, path);
  meta.rng_state = detail::read_pod<std::uint64_t>(f, path);

  std::vector<ParamRef<float>> state = model.state();
  const auto count = detail::read_pod<std::uint32_t>(f, path);
  if (count != state.size())
    throw std::invalid_argument(path + ": checkpoint has " + std::to_string(count) +
                                " entries, model expects " + std::to_string(state.size()));
  for (ParamRef<float>& ref : state) {
    const auto name_len = detail::read_pod<std::uint32_t>(f, path);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (!f) throw format_error(path + ": truncated checkpoint");
    if (name != ref.name)
      throw std::invalid_argument(path + ": entry '" + name + "' does not match model entry '" +
                                  ref.name + "'");
    const auto ndims = detail::read_pod<std::uint32_t>(f, path);
    std::vector<int> dims(ndims);
    for (auto& d : dims) d = static_cast<int>(detail::read_pod<std::uint32_t>(f, path));
    if (dims != ref.dims)
      throw std::invalid_argument(path + ": shape mismatch for '" + name + "'");
    const auto values = detail::read_pod<std::uint64_t>(f, path);
    if (values != ref.value->size())
      throw std::invalid_argument(path + ": size mismatch for '" + name + "'");
    f.read(reinterpret_cast<char*>(ref.value->data()),
           static_cast<std::streamsize>(values * sizeof(float)));
    if (!f) throw format_error(path + ": truncated checkpoint");
  }
  return meta;
}

}  // namespace passband
