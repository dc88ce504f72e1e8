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

#ifndef DOORLAB_RENDER_HPP_
#define DOORLAB_RENDER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "doorlab/errors.hpp"
#include "doorlab/image.hpp"
#include "doorlab/rng.hpp"
#include "doorlab/scene.hpp"
#include "doorlab/world.hpp"

namespace doorlab {

// Deterministic raycaster. The same (state, scene, domain, noise_seed)
// produces bit-identical frames on every call; the sim domain is flat-shaded
// and noise-free, so it is additionally independent of noise_seed.

struct RenderConfig {
  int height = 64;
  int width = 64;
  double vfov_deg = 60.0;
  double pitch = 0.18;  // camera tilt below horizontal, radians
  double depth_clip = 10.0;
  double room_depth = 4.0;   // back wall of the room behind the door
  double side_y = 2.2;       // hallway / room half-width
  double wall_height = 2.6;
  double frame_band = 0.06;  // painted frame width around the aperture
  double handle_radius = 0.03;
  double arm_radius = 0.035;
  double gripper_radius = 0.05;
  double lights_off_gain = 0.35;
};

struct Frame {
  RgbImage rgb;
  DepthImage depth;

  bool operator==(const Frame&) const = default;
};

enum class Modality { kRgb, kDepth };

inline const char* to_string(Modality m) {
  return m == Modality::kRgb ? "rgb" : "depth";
}

inline Modality parse_modality(const std::string& s) {
  if (s == "rgb") return Modality::kRgb;
  if (s == "depth") return Modality::kDepth;
  throw ConfigError("unknown modality: " + s);
}

namespace detail {

// Surface ids keep texture phases stable across frames.
enum Surface : int {
  kSurfFloor = 0,
  kSurfWall = 1,
  kSurfFrame = 2,
  kSurfDoor = 3,
  kSurfHandle = 4,
  kSurfArm = 5,
  kSurfRoomWall = 6,
  kSurfCeiling = 7,
  kSurfGlass = 8,
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int surface = -1;
  double u = 0.0, v = 0.0;  // texture coordinates on the hit surface
};

inline void consider(Hit& best, double t, int surface, double u, double v) {
  if (t > 1e-6 && t < best.t) best = Hit{t, surface, u, v};
}

// Axis-aligned plane coord = k, valid only where pred holds.
inline bool plane_hit(double o, double d, double k, double& t) {
  if (std::abs(d) < 1e-12) return false;
  t = (k - o) / d;
  return t > 1e-6;
}

inline bool sphere_hit(const Vec3& ro, const Vec3& rd, const Vec3& c,
                       double r, double& t) {
  double ox = ro.x - c.x, oy = ro.y - c.y, oz = ro.z - c.z;
  double b = ox * rd.x + oy * rd.y + oz * rd.z;
  double q = ox * ox + oy * oy + oz * oz - r * r;
  double disc = b * b - q;
  if (disc < 0.0) return false;
  t = -b - std::sqrt(disc);
  return t > 1e-6;
}

// Smooth two-sine value texture in [-1, 1]; phases keyed per surface so that
// adjacent frames of one episode share the pattern.
inline double texture_value(std::uint64_t scene_key, int surface, double u,
                            double v) {
  std::uint64_t k = seed_mix(scene_key, static_cast<std::uint64_t>(surface));
  double p1 = hash_uniform(seed_mix(k, 1)) * 2.0 * kPi;
  double p2 = hash_uniform(seed_mix(k, 2)) * 2.0 * kPi;
  double f1 = 6.0 + 6.0 * hash_uniform(seed_mix(k, 3));
  double f2 = 6.0 + 6.0 * hash_uniform(seed_mix(k, 4));
  return std::sin(u * f1 + p1) * std::sin(v * f2 + p2);
}

}  // namespace detail

inline Frame render(const WorldState& state, const SceneSpec& scene,
                    Domain domain, std::uint64_t noise_seed,
                    const RenderConfig& rcfg = RenderConfig{},
                    const WorldConfig& wcfg = WorldConfig{}) {
  using namespace detail;
  if (rcfg.height <= 0 || rcfg.width <= 0) {
    throw ContractViolation("render: non-positive resolution");
  }
  const StyleParams& style =
      domain == Domain::kSim ? scene.style_sim : scene.style_real;

  // Camera basis: x-forward in the robot frame, pitched down.
  double cy = std::cos(state.robot.base_yaw);
  double sy = std::sin(state.robot.base_yaw);
  double cp = std::cos(rcfg.pitch), sp = std::sin(rcfg.pitch);
  Vec3 eye{state.robot.base_x, state.robot.base_y, wcfg.camera_height};
  Vec3 fwd{cy * cp, sy * cp, -sp};
  Vec3 right{sy, -cy, 0.0};
  Vec3 up{-cy * sp, -sy * sp, -cp};  // negated camera-up; rows grow downward
  double focal = 0.5 * rcfg.height / std::tan(deg2rad(rcfg.vfov_deg) / 2.0);

  double half_w = scene.door_width / 2.0;
  Vec3 hinge = hinge_point(scene, wcfg);
  Vec3 pdir = panel_dir(scene, state.door.open_angle);
  // Panel plane normal (horizontal, orthogonal to pdir).
  Vec3 pn{pdir.y, -pdir.x, 0.0};

  // Handle lever and arm chain as strings of spheres.
  std::vector<Vec3> spheres;
  std::vector<int> sphere_surface;
  std::vector<double> sphere_radius;
  {
    Vec3 hb = handle_base_point(scene, state.door.open_angle, wcfg);
    Vec3 ht = lever_tip_point(scene, state.door.open_angle,
                              state.door.handle_angle, wcfg);
    const int kHandleSamples = 8;
    for (int i = 0; i < kHandleSamples; ++i) {
      double a = static_cast<double>(i) / (kHandleSamples - 1);
      spheres.push_back({hb.x + (ht.x - hb.x) * a, hb.y + (ht.y - hb.y) * a,
                         hb.z + (ht.z - hb.z) * a});
      sphere_surface.push_back(kSurfHandle);
      sphere_radius.push_back(rcfg.handle_radius);
    }
    std::vector<Vec3> chain = arm_chain_points(state.robot, wcfg);
    const int kLinkSamples = 6;
    for (std::size_t s = 0; s + 1 < chain.size(); ++s) {
      for (int i = 0; i < kLinkSamples; ++i) {
        double a = static_cast<double>(i) / (kLinkSamples - 1);
        const Vec3 &p = chain[s], &q = chain[s + 1];
        spheres.push_back({p.x + (q.x - p.x) * a, p.y + (q.y - p.y) * a,
                           p.z + (q.z - p.z) * a});
        sphere_surface.push_back(kSurfArm);
        sphere_radius.push_back(rcfg.arm_radius);
      }
    }
    spheres.push_back(chain.back());
    sphere_surface.push_back(kSurfArm);
    sphere_radius.push_back(rcfg.gripper_radius);
  }

  double light = scene.brightness * style.ambient_gain;
  if (!scene.lighting_on) light *= rcfg.lights_off_gain;
  std::uint64_t scene_key = hash_str(scene.scene_id);

  Frame out;
  out.rgb = RgbImage(rcfg.height, rcfg.width, 3);
  out.depth = DepthImage(rcfg.height, rcfg.width, 1);

  for (int r = 0; r < rcfg.height; ++r) {
    for (int c = 0; c < rcfg.width; ++c) {
      double px = (c + 0.5 - rcfg.width / 2.0) / focal;
      double py = (r + 0.5 - rcfg.height / 2.0) / focal;
      Vec3 rd{fwd.x + px * right.x + py * up.x,
              fwd.y + px * right.y + py * up.y,
              fwd.z + px * right.z + py * up.z};
      double norm = std::sqrt(rd.x * rd.x + rd.y * rd.y + rd.z * rd.z);
      rd.x /= norm;
      rd.y /= norm;
      rd.z /= norm;

      // skip_panel re-traces past the door for glass depth bleed-through.
      auto trace = [&](bool skip_panel) {
        Hit best;
        double t;
        // Floor.
        if (plane_hit(eye.z, rd.z, 0.0, t)) {
          consider(best, t, kSurfFloor, eye.x + t * rd.x, eye.y + t * rd.y);
        }
        // Ceiling.
        if (plane_hit(eye.z, rd.z, rcfg.wall_height, t)) {
          consider(best, t, kSurfCeiling, eye.x + t * rd.x, eye.y + t * rd.y);
        }
        // Side walls.
        for (double sy_wall : {-rcfg.side_y, rcfg.side_y}) {
          if (plane_hit(eye.y, rd.y, sy_wall, t)) {
            double z = eye.z + t * rd.z;
            if (z >= 0.0 && z <= rcfg.wall_height) {
              consider(best, t, kSurfWall, eye.x + t * rd.x, z);
            }
          }
        }
        // Room back wall.
        if (plane_hit(eye.x, rd.x, rcfg.room_depth, t)) {
          double z = eye.z + t * rd.z;
          if (z >= 0.0 && z <= rcfg.wall_height) {
            consider(best, t, kSurfRoomWall, eye.y + t * rd.y, z);
          }
        }
        // Doorway wall with aperture and painted frame band.
        if (plane_hit(eye.x, rd.x, 0.0, t)) {
          double y = eye.y + t * rd.y;
          double z = eye.z + t * rd.z;
          if (z >= 0.0 && z <= rcfg.wall_height) {
            bool aperture = std::abs(y) <= half_w && z <= wcfg.door_height;
            bool in_frame =
                !aperture && std::abs(y) <= half_w + rcfg.frame_band &&
                z <= wcfg.door_height + rcfg.frame_band;
            if (in_frame) {
              consider(best, t, kSurfFrame, y, z);
            } else if (!aperture) {
              consider(best, t, kSurfWall, y, z);
            }
          }
        }
        // Door panel rectangle.
        if (!skip_panel) {
          double denom = rd.x * pn.x + rd.y * pn.y;
          if (std::abs(denom) > 1e-12) {
            double tp = ((hinge.x - eye.x) * pn.x + (hinge.y - eye.y) * pn.y) /
                        denom;
            if (tp > 1e-6) {
              double hx = eye.x + tp * rd.x - hinge.x;
              double hy = eye.y + tp * rd.y - hinge.y;
              double u = hx * pdir.x + hy * pdir.y;
              double z = eye.z + tp * rd.z;
              if (u >= 0.0 && u <= scene.door_width && z >= 0.0 &&
                  z <= wcfg.door_height) {
                bool glass = u >= 0.25 * scene.door_width &&
                             u <= 0.75 * scene.door_width && z >= 1.3 &&
                             z <= 1.8;
                consider(best, tp, glass ? kSurfGlass : kSurfDoor, u, z);
              }
            }
          }
        }
        // Handle and arm spheres.
        for (std::size_t i = 0; i < spheres.size(); ++i) {
          if (sphere_hit(eye, rd, spheres[i], sphere_radius[i], t)) {
            consider(best, t, sphere_surface[i],
                     spheres[i].x + spheres[i].y, spheres[i].z);
          }
        }
        return best;
      };
      Hit best = trace(false);

      Rgb base{0.0, 0.0, 0.0};
      double depth_m = rcfg.depth_clip;
      if (best.surface >= 0) {
        depth_m = std::min(best.t, rcfg.depth_clip);
        switch (best.surface) {
          case kSurfFloor: base = style.floor; break;
          case kSurfWall: base = style.wall; break;
          case kSurfFrame: base = style.frame; break;
          case kSurfDoor: base = style.door; break;
          case kSurfHandle: base = style.handle; break;
          case kSurfArm: base = style.arm; break;
          case kSurfRoomWall:
            base = {style.wall[0] * 0.55, style.wall[1] * 0.55,
                    style.wall[2] * 0.55};
            break;
          case kSurfCeiling:
            base = {style.wall[0] * 1.08, style.wall[1] * 1.08,
                    style.wall[2] * 1.08};
            break;
          case kSurfGlass: {
            // Blend the panel color with a dark interior peek.
            double g = scene.glass_translucency;
            const Rgb peek{38.0, 38.0, 46.0};
            for (int k = 0; k < 3; ++k) {
              base[k] = (1.0 - g) * style.door[k] + g * peek[k];
            }
            break;
          }
          default: break;
        }
        if (style.texture_amplitude > 0.0) {
          double tex = texture_value(scene_key, best.surface, best.u, best.v);
          double f = 1.0 + style.texture_amplitude * tex;
          for (int k = 0; k < 3; ++k) base[k] *= f;
        }
      }
      for (int k = 0; k < 3; ++k) base[k] *= light;

      std::size_t pix = static_cast<std::size_t>(r) * rcfg.width + c;

      // Real-domain glass: depth bleeds through to whatever lies behind the
      // door, per pixel with probability glass_translucency. Sim stays opaque.
      if (best.surface == kSurfGlass && domain == Domain::kReal &&
          hash_uniform(seed_mix(noise_seed, pix, 500)) <
              scene.glass_translucency) {
        Hit behind = trace(true);
        depth_m = behind.surface >= 0 ? std::min(behind.t, rcfg.depth_clip)
                                      : rcfg.depth_clip;
      }

      if (style.noise_sigma_rgb > 0.0) {
        for (int k = 0; k < 3; ++k) {
          double n = hash_normal(seed_mix(noise_seed, pix, 100 + k));
          base[k] += style.noise_sigma_rgb * n;
        }
      }
      for (int k = 0; k < 3; ++k) out.rgb.at(r, c, k) = clamp_u8(base[k]);

      if (style.noise_sigma_depth > 0.0) {
        double n = hash_normal(seed_mix(noise_seed, pix, 200));
        depth_m += style.noise_sigma_depth * n;
      }
      out.depth.at(r, c, 0) = static_cast<float>(
          std::clamp(depth_m, 0.0, rcfg.depth_clip));
    }
  }
  return out;
}

// Ground-truth paired renders of the identical instant, used by the oracle
// adapter and as a reference for GAN evaluation.
struct RenderPair {
  Frame sim;
  Frame real;
};

inline RenderPair render_pair(const WorldState& state, const SceneSpec& scene,
                              std::uint64_t noise_seed,
                              const RenderConfig& rcfg = RenderConfig{},
                              const WorldConfig& wcfg = WorldConfig{}) {
  return RenderPair{render(state, scene, Domain::kSim, noise_seed, rcfg, wcfg),
                    render(state, scene, Domain::kReal, noise_seed, rcfg,
                           wcfg)};
}

}  // namespace doorlab

#endif  // DOORLAB_RENDER_HPP_
