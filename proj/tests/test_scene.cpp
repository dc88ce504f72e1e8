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

#include <catch2/catch_amalgamated.hpp>

#include "doorlab/scene.hpp"
#include "helpers.hpp"

using namespace doorlab;

TEST_CASE("shipped registry is canonical", "[scene]") {
  const SceneRegistry& reg = doorlab_test::registry();
  REQUIRE_NOTHROW(reg.validate_canonical());
  CHECK(reg.scenes().size() == 16);
  CHECK(reg.ids(Split::kTrain).size() == 6);
  CHECK(reg.ids(Split::kEval).size() == 10);

  int train_left = 0, eval_left = 0;
  for (const SceneSpec& s : reg.scenes()) {
    if (s.swing == Swing::kLeft) {
      (s.split == Split::kTrain ? train_left : eval_left)++;
    }
  }
  CHECK(train_left == 3);
  CHECK(eval_left == 5);

  // The domain gap exists in every scene and sim styles are clean.
  for (const SceneSpec& s : reg.scenes()) {
    CHECK_FALSE(s.style_sim == s.style_real);
    CHECK(s.style_sim.texture_amplitude == 0.0);
    CHECK(s.style_sim.noise_sigma_rgb == 0.0);
    CHECK(s.style_sim.noise_sigma_depth == 0.0);
    CHECK((s.brightness >= 0.0 && s.brightness <= 1.0));
    CHECK((s.glass_translucency >= 0.0 && s.glass_translucency <= 1.0));
  }
}

TEST_CASE("registry lookups", "[scene]") {
  const SceneRegistry& reg = doorlab_test::registry();
  std::string id = reg.ids(Split::kTrain).front();
  CHECK(reg.get(id).scene_id == id);
  CHECK(reg.contains(id));
  CHECK(reg.has(id));
  CHECK_FALSE(reg.contains("no-such-scene"));
  CHECK_THROWS_AS(reg.get("no-such-scene"), ConfigError);
  CHECK(reg.all_ids().size() == 16);
}

TEST_CASE("scene validation rejects bad specs", "[scene]") {
  SceneSpec ok = doorlab_test::registry().scenes().front();
  REQUIRE_NOTHROW(SceneRegistry::validate_scene(ok));

  SceneSpec same_styles = ok;
  same_styles.style_real = same_styles.style_sim;
  CHECK_THROWS_AS(SceneRegistry::validate_scene(same_styles), ConfigError);

  SceneSpec noisy_sim = ok;
  noisy_sim.style_sim.noise_sigma_rgb = 1.0;
  CHECK_THROWS_AS(SceneRegistry::validate_scene(noisy_sim), ConfigError);

  SceneSpec textured_sim = ok;
  textured_sim.style_sim.texture_amplitude = 0.2;
  CHECK_THROWS_AS(SceneRegistry::validate_scene(textured_sim), ConfigError);

  SceneSpec bright = ok;
  bright.brightness = 1.5;
  CHECK_THROWS_AS(SceneRegistry::validate_scene(bright), ConfigError);

  SceneSpec glass = ok;
  glass.glass_translucency = -0.1;
  CHECK_THROWS_AS(SceneRegistry::validate_scene(glass), ConfigError);
}

TEST_CASE("non-canonical registries are rejected as canonical", "[scene]") {
  std::vector<SceneSpec> few(doorlab_test::registry().scenes().begin(),
                             doorlab_test::registry().scenes().begin() + 4);
  SceneRegistry reg(few);
  CHECK_THROWS_AS(reg.validate_canonical(), ConfigError);
}

TEST_CASE("registry load reports file problems", "[scene]") {
  CHECK_THROWS_AS(SceneRegistry::load("/nonexistent/scenes.json"),
                  ConfigError);

  std::string dir = doorlab_test::temp_dir("scene_load");
  std::string bad = dir + "/bad.json";
  {
    std::ofstream os(bad);
    os << "{ not json";
  }
  CHECK_THROWS_AS(SceneRegistry::load(bad), ConfigError);
}
