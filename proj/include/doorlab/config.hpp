// Copyright 2026 The Doorlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DOORLAB_CONFIG_HPP_
#define DOORLAB_CONFIG_HPP_

#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "doorlab/adapt.hpp"
#include "doorlab/cyclegan.hpp"
#include "doorlab/evalharness.hpp"
#include "doorlab/policy.hpp"
#include "doorlab/render.hpp"
#include "doorlab/trainer.hpp"
#include "doorlab/world.hpp"

namespace doorlab {

// Config resolution is a three-layer merge: built-in defaults, then an
// optional JSON file, then explicit overrides. Files use RFC 7386 merge
// semantics (objects merge recursively, scalars replace).

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": top level must be object");
  return j;
}

inline nlohmann::json layer_configs(nlohmann::json base,
                                    const nlohmann::json& overlay) {
  base.merge_patch(overlay);
  return base;
}

// ---------------------------------------------------------------------------
// Per-struct parsers. Unknown keys are rejected so typos surface early.

namespace detail {

inline void check_keys(const nlohmann::json& j,
                       std::initializer_list<const char*> known,
                       const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) {
      if (it.key() == k) ok = true;
    }
    if (!ok) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

}  // namespace detail

inline Domain parse_domain(const std::string& s) {
  if (s == "sim") return Domain::kSim;
  if (s == "real") return Domain::kReal;
  throw ConfigError("unknown domain: " + s);
}

inline WorldConfig world_config_from_json(const nlohmann::json& j) {
  WorldConfig c;
  detail::check_keys(j,
                     {"arm_dof", "timeout_steps", "unlatch_threshold_deg",
                      "open_threshold_deg", "grasp_radius", "v_limit",
                      "yaw_rate_limit", "arm_delta_limit", "handle_gain",
                      "push_gain", "gain_variant_b"},
                     "world");
  c.arm_dof = j.value("arm_dof", c.arm_dof);
  c.timeout_steps = j.value("timeout_steps", c.timeout_steps);
  if (j.contains("unlatch_threshold_deg")) {
    c.unlatch_threshold = deg2rad(j["unlatch_threshold_deg"].get<double>());
  }
  if (j.contains("open_threshold_deg")) {
    c.open_threshold = deg2rad(j["open_threshold_deg"].get<double>());
  }
  c.grasp_radius = j.value("grasp_radius", c.grasp_radius);
  c.v_limit = j.value("v_limit", c.v_limit);
  c.yaw_rate_limit = j.value("yaw_rate_limit", c.yaw_rate_limit);
  c.arm_delta_limit = j.value("arm_delta_limit", c.arm_delta_limit);
  c.handle_gain = j.value("handle_gain", c.handle_gain);
  c.push_gain = j.value("push_gain", c.push_gain);
  c.gain_variant_b = j.value("gain_variant_b", c.gain_variant_b);
  if (c.arm_dof < 2 || c.arm_dof > 16) {
    throw ConfigError("world.arm_dof must lie in [2, 16]");
  }
  if (c.timeout_steps <= 0) {
    throw ConfigError("world.timeout_steps must be positive");
  }
  return c;
}

inline RenderConfig render_config_from_json(const nlohmann::json& j) {
  RenderConfig c;
  detail::check_keys(
      j, {"height", "width", "vfov_deg", "pitch", "depth_clip"}, "render");
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.vfov_deg = j.value("vfov_deg", c.vfov_deg);
  c.pitch = j.value("pitch", c.pitch);
  c.depth_clip = j.value("depth_clip", c.depth_clip);
  if (c.height <= 0 || c.width <= 0) {
    throw ConfigError("render resolution must be positive");
  }
  if (c.depth_clip <= 0.0) throw ConfigError("render.depth_clip <= 0");
  return c;
}

inline AugmentConfig augment_config_from_json(const nlohmann::json& j) {
  AugmentConfig c;
  detail::check_keys(j,
                     {"crop_fraction", "brightness_lo", "brightness_hi",
                      "saturation_lo", "saturation_hi", "hue_delta",
                      "contrast_lo", "contrast_hi", "cutout_count",
                      "cutout_max", "gaussian_sigma"},
                     "augment");
  c.crop_fraction = j.value("crop_fraction", c.crop_fraction);
  c.brightness_lo = j.value("brightness_lo", c.brightness_lo);
  c.brightness_hi = j.value("brightness_hi", c.brightness_hi);
  c.saturation_lo = j.value("saturation_lo", c.saturation_lo);
  c.saturation_hi = j.value("saturation_hi", c.saturation_hi);
  c.hue_delta = j.value("hue_delta", c.hue_delta);
  c.contrast_lo = j.value("contrast_lo", c.contrast_lo);
  c.contrast_hi = j.value("contrast_hi", c.contrast_hi);
  c.cutout_count = j.value("cutout_count", c.cutout_count);
  c.cutout_max = j.value("cutout_max", c.cutout_max);
  c.gaussian_sigma = j.value("gaussian_sigma", c.gaussian_sigma);
  if (c.brightness_lo > c.brightness_hi ||
      c.saturation_lo > c.saturation_hi || c.contrast_lo > c.contrast_hi) {
    throw ConfigError("augment: range bounds inverted");
  }
  if (c.crop_fraction <= 0.0 || c.crop_fraction > 1.0) {
    throw ConfigError("augment.crop_fraction must lie in (0, 1]");
  }
  if (c.cutout_count < 0 || c.cutout_max < 0 || c.gaussian_sigma < 0.0 ||
      c.hue_delta < 0.0) {
    throw ConfigError("augment: negative magnitude");
  }
  return c;
}

inline PolicyConfig policy_config_from_json(const nlohmann::json& j) {
  PolicyConfig c;
  detail::check_keys(j,
                     {"height", "width", "base_width", "embed_dim",
                      "fused_dim", "fusion_hidden", "lookahead", "arm_dof",
                      "depth_clip", "terminate_threshold",
                      "channelwise_fusion"},
                     "policy");
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.base_width = j.value("base_width", c.base_width);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.fused_dim = j.value("fused_dim", c.fused_dim);
  c.fusion_hidden = j.value("fusion_hidden", c.fusion_hidden);
  c.lookahead = j.value("lookahead", c.lookahead);
  c.arm_dof = j.value("arm_dof", c.arm_dof);
  c.depth_clip = j.value("depth_clip", c.depth_clip);
  c.terminate_threshold = j.value("terminate_threshold",
                                  c.terminate_threshold);
  c.channelwise_fusion = j.value("channelwise_fusion", c.channelwise_fusion);
  if (c.lookahead <= 0) throw ConfigError("policy.lookahead must be > 0");
  if (c.base_width < 2) throw ConfigError("policy.base_width must be >= 2");
  if (c.embed_dim < 1 || c.fused_dim < 1 || c.fusion_hidden < 1) {
    throw ConfigError("policy widths must be >= 1");
  }
  if (c.height % 16 != 0 || c.width % 16 != 0) {
    throw ConfigError("policy resolution must be divisible by 16");
  }
  if (c.depth_clip <= 0.0) throw ConfigError("policy.depth_clip <= 0");
  return c;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  detail::check_keys(
      j,
      {"batch_size", "learning_rate", "optimizer", "steps",
       "checkpoint_interval_steps", "n_variants", "modality", "adapter_kind",
       "method", "seed", "grad_clip", "policy", "augment"},
      "train");
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  if (j.contains("optimizer")) {
    c.optimizer = parse_optimizer(j["optimizer"].get<std::string>());
  }
  c.steps = j.value("steps", c.steps);
  c.checkpoint_interval_steps =
      j.value("checkpoint_interval_steps", c.checkpoint_interval_steps);
  c.n_variants = j.value("n_variants", c.n_variants);
  if (j.contains("modality")) {
    c.modality = parse_policy_modality(j["modality"].get<std::string>());
  }
  if (j.contains("adapter_kind")) {
    c.adapter_kind = parse_adapter_kind(j["adapter_kind"].get<std::string>());
  }
  if (j.contains("method")) {
    c.method = parse_method(j["method"].get<std::string>());
  }
  c.seed = j.value("seed", c.seed);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  if (j.contains("policy")) {
    c.policy = policy_config_from_json(j["policy"]);
  }
  if (j.contains("augment")) {
    c.augment = augment_config_from_json(j["augment"]);
  }
  if (c.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (c.steps < 0) throw ConfigError("train.steps must be >= 0");
  if (c.learning_rate <= 0.0) {
    throw ConfigError("train.learning_rate must be > 0");
  }
  if (c.n_variants < 1) throw ConfigError("train.n_variants must be >= 1");
  if (c.method == Method::kTcl && c.n_variants < 3) {
    throw ConfigError("train.n_variants must be >= 3 for method=tcl");
  }
  return c;
}

struct EvalSettings {
  ProtocolSpec protocol;
  int workers = 1;
};

inline EvalSettings eval_settings_from_json(const nlohmann::json& j) {
  EvalSettings s;
  detail::check_keys(
      j, {"scenes", "trials_per_scene", "domains", "seed", "workers"},
      "eval");
  if (j.contains("scenes")) {
    s.protocol.scene_ids.clear();
    for (const auto& id : j["scenes"]) {
      s.protocol.scene_ids.push_back(id.get<std::string>());
    }
  }
  s.protocol.trials_per_scene =
      j.value("trials_per_scene", s.protocol.trials_per_scene);
  if (j.contains("domains")) {
    s.protocol.domains.clear();
    for (const auto& d : j["domains"]) {
      s.protocol.domains.push_back(parse_domain(d.get<std::string>()));
    }
    if (s.protocol.domains.empty()) {
      throw ConfigError("eval.domains must not be empty");
    }
  }
  s.protocol.seed = j.value("seed", s.protocol.seed);
  s.workers = j.value("workers", s.workers);
  if (s.protocol.trials_per_scene < 1) {
    throw ConfigError("eval.trials_per_scene must be >= 1");
  }
  if (s.workers < 1) throw ConfigError("eval.workers must be >= 1");
  return s;
}

inline CycleGanConfig cyclegan_config_from_json(const nlohmann::json& j) {
  CycleGanConfig c;
  detail::check_keys(j,
                     {"height", "width", "base_width", "batch_size", "steps",
                      "checkpoint_interval", "lr", "cycle_weight",
                      "depth_clip", "seed"},
                     "gan");
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.base_width = j.value("base_width", c.base_width);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps = j.value("steps", c.steps);
  c.checkpoint_interval = j.value("checkpoint_interval",
                                  c.checkpoint_interval);
  c.lr = j.value("lr", c.lr);
  c.cycle_weight = j.value("cycle_weight", c.cycle_weight);
  c.depth_clip = j.value("depth_clip", c.depth_clip);
  c.seed = j.value("seed", c.seed);
  if (c.batch_size < 1) throw ConfigError("gan.batch_size must be >= 1");
  if (c.steps < 0) throw ConfigError("gan.steps must be >= 0");
  if (c.lr <= 0.0) throw ConfigError("gan.lr must be > 0");
  return c;
}

}  // namespace doorlab

#endif  // DOORLAB_CONFIG_HPP_
