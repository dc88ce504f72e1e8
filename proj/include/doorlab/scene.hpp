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

#ifndef DOORLAB_SCENE_HPP_
#define DOORLAB_SCENE_HPP_

#include <array>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "doorlab/errors.hpp"

namespace doorlab {

enum class Swing { kLeft, kRight };
enum class Split { kTrain, kEval };
enum class DynamicsVariant { kA, kB };
enum class Domain { kSim, kReal };

inline const char* to_string(Swing s) {
  return s == Swing::kLeft ? "left" : "right";
}
inline const char* to_string(Split s) {
  return s == Split::kTrain ? "train" : "eval";
}
inline const char* to_string(DynamicsVariant v) {
  return v == DynamicsVariant::kA ? "A" : "B";
}
inline const char* to_string(Domain d) {
  return d == Domain::kSim ? "sim" : "real";
}
inline Domain other_domain(Domain d) {
  return d == Domain::kSim ? Domain::kReal : Domain::kSim;
}

using Rgb = std::array<double, 3>;  // 0..255 per channel

// Visual styling of one domain of a scene. The sim style is flat and
// noiseless; the real style carries procedural texture, sensor noise and
// lighting effects.
struct StyleParams {
  Rgb door{};
  Rgb frame{};
  Rgb handle{};
  Rgb wall{};
  Rgb floor{};
  Rgb arm{};
  double texture_amplitude = 0.0;  // relative amplitude of value-noise texture
  double noise_sigma_rgb = 0.0;    // additive Gaussian sigma, 8-bit units
  double noise_sigma_depth = 0.0;  // additive Gaussian sigma, world units
  double ambient_gain = 1.0;       // global light multiplier

  bool operator==(const StyleParams&) const = default;
};

struct SceneSpec {
  std::string scene_id;
  Swing swing = Swing::kLeft;
  double handle_height = 0.95;  // world units
  double door_width = 0.9;      // world units
  StyleParams style_sim;
  StyleParams style_real;
  bool lighting_on = true;
  double brightness = 1.0;          // time-of-day analog, in [0, 1]
  double glass_translucency = 0.5;  // in [0, 1]
  DynamicsVariant dynamics_variant = DynamicsVariant::kA;
  Split split = Split::kTrain;
};

namespace detail {

inline Rgb json_rgb(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError("scene registry: color must be a 3-element array");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline StyleParams json_style(const nlohmann::json& j) {
  StyleParams s;
  s.door = json_rgb(j.at("door"));
  s.frame = json_rgb(j.at("frame"));
  s.handle = json_rgb(j.at("handle"));
  s.wall = json_rgb(j.at("wall"));
  s.floor = json_rgb(j.at("floor"));
  s.arm = json_rgb(j.at("arm"));
  s.texture_amplitude = j.value("texture_amplitude", 0.0);
  s.noise_sigma_rgb = j.value("noise_sigma_rgb", 0.0);
  s.noise_sigma_depth = j.value("noise_sigma_depth", 0.0);
  s.ambient_gain = j.value("ambient_gain", 1.0);
  return s;
}

}  // namespace detail

// The full set of scenes an experiment runs against, usually loaded from the
// versioned assets/scenes.json file.
class SceneRegistry {
 public:
  SceneRegistry() = default;
  explicit SceneRegistry(std::vector<SceneSpec> scenes)
      : scenes_(std::move(scenes)) {}

  static SceneRegistry load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("scene registry: cannot open " + path);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("scene registry: bad JSON in " + path + ": " +
                        e.what());
    }
    std::vector<SceneSpec> scenes;
    for (const auto& rec : j.at("scenes")) {
      SceneSpec s;
      s.scene_id = rec.at("scene_id").get<std::string>();
      std::string swing = rec.at("swing").get<std::string>();
      if (swing == "left") {
        s.swing = Swing::kLeft;
      } else if (swing == "right") {
        s.swing = Swing::kRight;
      } else {
        throw ConfigError("scene " + s.scene_id + ": bad swing " + swing);
      }
      s.handle_height = rec.at("handle_height").get<double>();
      s.door_width = rec.at("door_width").get<double>();
      s.style_sim = detail::json_style(rec.at("style_sim"));
      s.style_real = detail::json_style(rec.at("style_real"));
      s.lighting_on = rec.at("lighting_on").get<bool>();
      s.brightness = rec.at("brightness").get<double>();
      s.glass_translucency = rec.at("glass_translucency").get<double>();
      std::string var = rec.at("dynamics_variant").get<std::string>();
      if (var == "A") {
        s.dynamics_variant = DynamicsVariant::kA;
      } else if (var == "B") {
        s.dynamics_variant = DynamicsVariant::kB;
      } else {
        throw ConfigError("scene " + s.scene_id + ": bad variant " + var);
      }
      std::string split = rec.at("split").get<std::string>();
      if (split == "train") {
        s.split = Split::kTrain;
      } else if (split == "eval") {
        s.split = Split::kEval;
      } else {
        throw ConfigError("scene " + s.scene_id + ": bad split " + split);
      }
      validate_scene(s);
      scenes.push_back(std::move(s));
    }
    SceneRegistry reg(std::move(scenes));
    return reg;
  }

  static void validate_scene(const SceneSpec& s) {
    if (s.style_sim == s.style_real) {
      throw ConfigError("scene " + s.scene_id +
                        ": style_sim must differ from style_real");
    }
    if (s.style_sim.texture_amplitude != 0.0 ||
        s.style_sim.noise_sigma_rgb != 0.0 ||
        s.style_sim.noise_sigma_depth != 0.0) {
      throw ConfigError("scene " + s.scene_id +
                        ": sim style must be flat and noiseless");
    }
    if (s.brightness < 0.0 || s.brightness > 1.0) {
      throw ConfigError("scene " + s.scene_id + ": brightness out of [0,1]");
    }
    if (s.glass_translucency < 0.0 || s.glass_translucency > 1.0) {
      throw ConfigError("scene " + s.scene_id +
                        ": glass_translucency out of [0,1]");
    }
  }

  // The shipped registry contract: 16 scenes, 6 train (3 left / 3 right) and
  // 10 eval (5 left / 5 right).
  void validate_canonical() const {
    int train_left = 0, train_right = 0, eval_left = 0, eval_right = 0;
    for (const auto& s : scenes_) {
      if (s.split == Split::kTrain) {
        (s.swing == Swing::kLeft ? train_left : train_right)++;
      } else {
        (s.swing == Swing::kLeft ? eval_left : eval_right)++;
      }
    }
    if (scenes_.size() != 16 || train_left != 3 || train_right != 3 ||
        eval_left != 5 || eval_right != 5) {
      throw ConfigError(
          "canonical registry must have 16 scenes: 6 train (3L/3R), "
          "10 eval (5L/5R)");
    }
  }

  const SceneSpec& get(const std::string& scene_id) const {
    for (const auto& s : scenes_) {
      if (s.scene_id == scene_id) return s;
    }
    throw ConfigError("unknown scene_id: " + scene_id);
  }

  bool contains(const std::string& scene_id) const {
    for (const auto& s : scenes_) {
      if (s.scene_id == scene_id) return true;
    }
    return false;
  }

  bool has(const std::string& scene_id) const {
    for (const auto& s : scenes_) {
      if (s.scene_id == scene_id) return true;
    }
    return false;
  }

  std::vector<std::string> ids(Split split) const {
    std::vector<std::string> out;
    for (const auto& s : scenes_) {
      if (s.split == split) out.push_back(s.scene_id);
    }
    return out;
  }

  std::vector<std::string> all_ids() const {
    std::vector<std::string> out;
    for (const auto& s : scenes_) out.push_back(s.scene_id);
    return out;
  }

  const std::vector<SceneSpec>& scenes() const { return scenes_; }

 private:
  std::vector<SceneSpec> scenes_;
};

}  // namespace doorlab

#endif  // DOORLAB_SCENE_HPP_
