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

// Experiment configuration: a JSON file with nested sections. Unknown fields
// are hard errors, serialization is key-sorted and round-trip stable, and
// the resolved form (normalization statistics filled in) is written beside
// every run's outputs.

#include <json.hpp>

#include <fstream>
#include <string>
#include <vector>

#include "passband/augment.hpp"
#include "passband/checkpoint.hpp"
#include "passband/errors.hpp"
#include "passband/testgrid.hpp"
#include "passband/train.hpp"

namespace passband {

struct DatasetConfig {
  std::string dir;
  int num_classes = 10;
  std::size_t train_limit = 0;  // 0 = all
  std::size_t test_limit = 0;
};

struct NormalizationConfig {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool empty() const { return mean.empty() && stddev.empty(); }
  ChannelStats stats() const { return ChannelStats{mean, stddev}; }
};

struct ExperimentConfig {
  DatasetConfig dataset;
  GridSpec grid;
  AugmentPolicy augment;
  TrainConfig train;
  NormalizationConfig normalization;
  std::string out_dir = "out";
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& section,
                           std::initializer_list<const char*> known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) ok = true;
    if (!ok)
      throw std::invalid_argument("config: unknown field '" +
                                  (section.empty() ? it.key() : section + "." + it.key()) + "'");
  }
}

template <typename T>
void get_to_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) obj.at(key).get_to(out);
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  using detail::get_to_if;
  using detail::reject_unknown;
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
  }
  reject_unknown(root, "", {"dataset", "grid", "augment", "train", "normalization", "out_dir"});
  ExperimentConfig config;
  try {
    if (root.contains("dataset")) {
      const auto& d = root.at("dataset");
      reject_unknown(d, "dataset", {"dir", "num_classes", "train_limit", "test_limit"});
      get_to_if(d, "dir", config.dataset.dir);
      get_to_if(d, "num_classes", config.dataset.num_classes);
      get_to_if(d, "train_limit", config.dataset.train_limit);
      get_to_if(d, "test_limit", config.dataset.test_limit);
    }
    if (root.contains("grid")) {
      const auto& g = root.at("grid");
      reject_unknown(g, "grid", {"sigmas", "widths", "kinds"});
      get_to_if(g, "sigmas", config.grid.sigmas);
      get_to_if(g, "widths", config.grid.widths);
      if (g.contains("kinds")) {
        config.grid.kinds.clear();
        for (const auto& k : g.at("kinds"))
          config.grid.kinds.push_back(filter_kind_from_string(k.get<std::string>()));
      }
    }
    if (root.contains("augment")) {
      const auto& a = root.at("augment");
      reject_unknown(a, "augment", {"sigma_min", "sigma_max", "width_choices", "seed"});
      get_to_if(a, "sigma_min", config.augment.sigma_min);
      get_to_if(a, "sigma_max", config.augment.sigma_max);
      get_to_if(a, "width_choices", config.augment.width_choices);
      get_to_if(a, "seed", config.augment.seed);
    }
    if (root.contains("train")) {
      const auto& t = root.at("train");
      reject_unknown(t, "train",
                     {"batch_size", "initial_lr", "lr_milestones", "lr_gamma", "epochs",
                      "momentum", "weight_decay", "seed", "stochastic_augment",
                      "random_crop_flip", "model"});
      get_to_if(t, "batch_size", config.train.batch_size);
      get_to_if(t, "initial_lr", config.train.initial_lr);
      get_to_if(t, "lr_milestones", config.train.lr_milestones);
      get_to_if(t, "lr_gamma", config.train.lr_gamma);
      get_to_if(t, "epochs", config.train.epochs);
      get_to_if(t, "momentum", config.train.momentum);
      get_to_if(t, "weight_decay", config.train.weight_decay);
      get_to_if(t, "seed", config.train.seed);
      get_to_if(t, "stochastic_augment", config.train.stochastic_augment);
      get_to_if(t, "random_crop_flip", config.train.random_crop_flip);
      get_to_if(t, "model", config.train.model);
    }
    if (root.contains("normalization")) {
      const auto& n = root.at("normalization");
      reject_unknown(n, "normalization", {"mean", "stddev"});
      get_to_if(n, "mean", config.normalization.mean);
      get_to_if(n, "stddev", config.normalization.stddev);
    }
    get_to_if(root, "out_dir", config.out_dir);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  if (config.normalization.mean.size() != config.normalization.stddev.size())
    throw std::invalid_argument("config: normalization.mean and normalization.stddev lengths differ");
  config.grid.validate();
  config.augment.validate();
  config.train.validate();
  return config;
}

inline std::string serialize_config(const ExperimentConfig& config) {
  nlohmann::json root;  // keys are emitted sorted: byte-stable round trips
  root["dataset"] = {{"dir", config.dataset.dir},
                     {"num_classes", config.dataset.num_classes},
                     {"train_limit", config.dataset.train_limit},
                     {"test_limit", config.dataset.test_limit}};
  std::vector<std::string> kinds;
  for (FilterKind k : config.grid.kinds) kinds.push_back(to_string(k));
  root["grid"] = {{"sigmas", config.grid.sigmas},
                  {"widths", config.grid.widths},
                  {"kinds", kinds}};
  root["augment"] = {{"sigma_min", config.augment.sigma_min},
                     {"sigma_max", config.augment.sigma_max},
                     {"width_choices", config.augment.width_choices},
                     {"seed", config.augment.seed}};
  root["train"] = {{"batch_size", config.train.batch_size},
                   {"initial_lr", config.train.initial_lr},
                   {"lr_milestones", config.train.lr_milestones},
                   {"lr_gamma", config.train.lr_gamma},
                   {"epochs", config.train.epochs},
                   {"momentum", config.train.momentum},
                   {"weight_decay", config.train.weight_decay},
                   {"seed", config.train.seed},
                   {"stochastic_augment", config.train.stochastic_augment},
                   {"random_crop_flip", config.train.random_crop_flip},
                   {"model", config.train.model}};
  if (!config.normalization.empty())
    root["normalization"] = {{"mean", config.normalization.mean},
                             {"stddev", config.normalization.stddev}};
  root["out_dir"] = config.out_dir;
  return root.dump(2) + "\n";
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config file not found: " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str());
}

inline std::uint64_t config_hash(const ExperimentConfig& config) {
  return fnv1a64(serialize_config(config));
}

}  // namespace passband
