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

#ifndef DOORLAB_TESTS_HELPERS_HPP_
#define DOORLAB_TESTS_HELPERS_HPP_

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doorlab/adapt.hpp"
#include "doorlab/data.hpp"
#include "doorlab/policy.hpp"
#include "doorlab/scene.hpp"

namespace doorlab_test {

inline const doorlab::SceneRegistry& registry() {
  static doorlab::SceneRegistry reg = doorlab::SceneRegistry::load(
      std::string(DOORLAB_SOURCE_DIR) + "/assets/scenes.json");
  return reg;
}

// First shipped scene matching the filters, for tests that need "a" scene.
inline const doorlab::SceneSpec& scene_where(doorlab::Split split,
                                             doorlab::Swing swing) {
  for (const doorlab::SceneSpec& s : registry().scenes()) {
    if (s.split == split && s.swing == swing) return s;
  }
  throw std::runtime_error("no such scene in shipped registry");
}

// Fresh empty directory under the build tree temp area.
inline std::string temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / "doorlab_tests" / tag;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

inline std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is),
                     std::istreambuf_iterator<char>());
}

// Identity augmentation: full crop, neutral photometrics, no cuts or noise.
inline doorlab::AugmentConfig neutral_augment() {
  doorlab::AugmentConfig a;
  a.crop_fraction = 1.0;
  a.brightness_lo = a.brightness_hi = 1.0;
  a.saturation_lo = a.saturation_hi = 1.0;
  a.hue_delta = 0.0;
  a.contrast_lo = a.contrast_hi = 1.0;
  a.cutout_count = 0;
  a.gaussian_sigma = 0.0;
  return a;
}

// Small network for tests that train or differentiate.
inline doorlab::PolicyConfig tiny_policy(
    doorlab::PolicyModality m = doorlab::PolicyModality::kRgb,
    int resolution = 32) {
  doorlab::PolicyConfig p;
  p.height = p.width = resolution;
  p.base_width = 2;
  p.embed_dim = 8;
  p.fused_dim = 8;
  p.fusion_hidden = 8;
  p.modality = m;
  return p;
}

// Deterministic synthetic episode with patterned frames and distinct
// actions; no renderer involved, so datastore tests stay fast.
inline doorlab::Episode synthetic_episode(int length, int height, int width,
                                          std::uint64_t seed = 11,
                                          int arm_dof = 3) {
  using namespace doorlab;
  Episode ep;
  ep.scene_id = "synthetic";
  ep.domain = Domain::kSim;
  ep.seed = seed;
  ep.dynamics_variant = 'A';
  ep.success = true;
  for (int i = 0; i < length; ++i) {
    FrameRecord rec;
    rec.state.robot.arm_joints.assign(arm_dof, 0.1 * i);
    rec.state.step = i;
    rec.noise_seed = seed_mix(seed, static_cast<std::uint64_t>(i));
    rec.frame.rgb = RgbImage(height, width, 3);
    rec.frame.depth = DepthImage(height, width, 1);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        for (int c = 0; c < 3; ++c) {
          rec.frame.rgb.at(y, x, c) =
              static_cast<std::uint8_t>((y * 31 + x * 7 + c * 13 + i) % 256);
        }
        rec.frame.depth.at(y, x, 0) =
            static_cast<float>((y + x + i) % 10) * 0.5f;
      }
    }
    rec.action.arm.assign(arm_dof, 0.0);
    bool last = i == length - 1;
    if (!last) {
      rec.action.base[0] = 0.01 * (i + 1);
      rec.action.base[1] = -0.02 * (i + 1);
      for (int d = 0; d < arm_dof; ++d) rec.action.arm[d] = 0.001 * (i + d);
    }
    rec.action.terminate = last;
    ep.frames.push_back(std::move(rec));
  }
  return ep;
}

}  // namespace doorlab_test

#endif  // DOORLAB_TESTS_HELPERS_HPP_
