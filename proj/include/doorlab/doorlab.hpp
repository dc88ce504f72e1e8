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

#ifndef DOORLAB_DOORLAB_HPP_
#define DOORLAB_DOORLAB_HPP_

#include "doorlab/adapt.hpp"
#include "doorlab/config.hpp"
#include "doorlab/cyclegan.hpp"
#include "doorlab/data.hpp"
#include "doorlab/errors.hpp"
#include "doorlab/evalharness.hpp"
#include "doorlab/experiment.hpp"
#include "doorlab/expert.hpp"
#include "doorlab/image.hpp"
#include "doorlab/losses.hpp"
#include "doorlab/nn.hpp"
#include "doorlab/policy.hpp"
#include "doorlab/render.hpp"
#include "doorlab/rng.hpp"
#include "doorlab/scene.hpp"
#include "doorlab/trainer.hpp"
#include "doorlab/world.hpp"

#endif  // DOORLAB_DOORLAB_HPP_
