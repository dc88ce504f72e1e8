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

#ifndef DOORLAB_WORLD_HPP_
#define DOORLAB_WORLD_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "doorlab/errors.hpp"
#include "doorlab/rng.hpp"
#include "doorlab/scene.hpp"

namespace doorlab {

// Kinematic simulator of the latched-door task. World frame: the door wall
// lies in the x=0 plane, the robot approaches from x<0 along +x, z is up.
// The doorway aperture is centered on y=0 and the door panel opens away from
// the robot (into the room) about a vertical hinge.

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }

enum class FailureReason { kNone, kCollision, kTimeout };

inline const char* to_string(FailureReason r) {
  switch (r) {
    case FailureReason::kNone: return "none";
    case FailureReason::kCollision: return "collision";
    default: return "timeout";
  }
}

struct WorldConfig {
  int arm_dof = 3;               // pan joint + (arm_dof-1) in-plane joints
  int timeout_steps = 1200;      // 2 minutes at 10 Hz
  double dt = 0.1;               // control period, seconds

  // Task geometry thresholds.
  double unlatch_threshold = deg2rad(45.0);
  double open_threshold = deg2rad(70.0);
  double handle_max = deg2rad(90.0);
  double grasp_radius = 0.18;
  double doorway_cross_x = 0.2;  // base x past which the robot has entered

  // Actuation limits (clipped before integration).
  double v_limit = 0.5;           // world units / s
  double yaw_rate_limit = 0.8;    // rad / s
  double arm_delta_limit = 0.08;  // rad / step

  // Interaction gains.
  double handle_gain = 7.0;  // handle radians per unit of EE descent
  double push_gain = 2.5;    // door radians per unit of forward motion
  double push_band = 0.15;   // base front within this of the plane can push

  // Robot body and arm.
  double robot_radius = 0.25;
  double arm_mount_height = 0.55;
  double arm_total_length = 0.8;
  double camera_height = 1.15;

  // Dynamics variants scale all actuation (two robot builds).
  double gain_variant_a = 1.0;
  double gain_variant_b = 0.85;

  // Scene constants.
  double door_height = 2.0;
  double panel_reveal = 0.02;        // closed panel sits this far into the room
  double handle_edge_offset = 0.12;  // handle distance from the free edge
  double lever_length = 0.18;
  double start_x = -1.0;  // nominal approach distance

  // Joint limits: pan, then in-plane joints.
  double pan_limit = 1.2;
  double lift_lo = -0.8, lift_hi = 1.3;
  double elbow_lo = -2.4, elbow_hi = 0.6;

  double variant_gain(DynamicsVariant v) const {
    return v == DynamicsVariant::kA ? gain_variant_a : gain_variant_b;
  }
};

struct RobotState {
  double base_x = 0.0;
  double base_y = 0.0;
  double base_yaw = 0.0;
  std::vector<double> arm_joints;

  bool operator==(const RobotState&) const = default;
};

struct DoorState {
  double handle_angle = 0.0;  // radians, 0 = horizontal lever
  double open_angle = 0.0;    // radians, 0 = closed
  bool latched = true;

  bool operator==(const DoorState&) const = default;
};

struct WorldState {
  RobotState robot;
  DoorState door;
  int step = 0;
  bool failed = false;
  FailureReason failure_reason = FailureReason::kNone;

  bool operator==(const WorldState&) const = default;
};

struct Action {
  std::array<double, 2> base{0.0, 0.0};  // forward velocity, yaw rate
  std::vector<double> arm;               // joint deltas, radians
  bool terminate = false;

  bool operator==(const Action&) const = default;

  static Action zero(int arm_dof) {
    Action a;
    a.arm.assign(arm_dof, 0.0);
    return a;
  }
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline double dist3(const Vec3& a, const Vec3& b) {
  double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// ---------------------------------------------------------------------------
// Geometry helpers shared with the renderer.

// Hinge position in the door wall plane (at the reveal offset).
inline Vec3 hinge_point(const SceneSpec& scene, const WorldConfig& cfg) {
  double y = scene.swing == Swing::kLeft ? scene.door_width / 2.0
                                         : -scene.door_width / 2.0;
  return {cfg.panel_reveal, y, 0.0};
}

// Unit vector (in the xy plane) from the hinge toward the free edge of the
// panel, at opening angle theta.
inline Vec3 panel_dir(const SceneSpec& scene, double open_angle) {
  double s = std::sin(open_angle), c = std::cos(open_angle);
  if (scene.swing == Swing::kLeft) return {s, -c, 0.0};
  return {s, c, 0.0};
}

// Base of the handle lever on the panel face.
inline Vec3 handle_base_point(const SceneSpec& scene, double open_angle,
                              const WorldConfig& cfg) {
  Vec3 h = hinge_point(scene, cfg);
  Vec3 d = panel_dir(scene, open_angle);
  double u = scene.door_width - cfg.handle_edge_offset;
  return {h.x + u * d.x, h.y + u * d.y, scene.handle_height};
}

// Tip of the handle lever. The lever points from its base toward the hinge
// and rotates downward as handle_angle grows.
inline Vec3 lever_tip_point(const SceneSpec& scene, double open_angle,
                            double handle_angle, const WorldConfig& cfg) {
  Vec3 b = handle_base_point(scene, open_angle, cfg);
  Vec3 d = panel_dir(scene, open_angle);
  double ch = std::cos(handle_angle), sh = std::sin(handle_angle);
  return {b.x - cfg.lever_length * ch * d.x,
          b.y - cfg.lever_length * ch * d.y,
          b.z - cfg.lever_length * sh};
}

// Forward kinematics: pan joint about z, then a chain of equal-length links
// in the vertical plane selected by the pan.
inline Vec3 end_effector(const RobotState& r, const WorldConfig& cfg) {
  int dof = static_cast<int>(r.arm_joints.size());
  double link = cfg.arm_total_length / std::max(1, dof - 1);
  double phi = 0.0, reach = 0.0, height = cfg.arm_mount_height;
  for (int i = 1; i < dof; ++i) {
    phi += r.arm_joints[i];
    reach += link * std::cos(phi);
    height += link * std::sin(phi);
  }
  double heading = r.base_yaw + r.arm_joints[0];
  return {r.base_x + reach * std::cos(heading),
          r.base_y + reach * std::sin(heading), height};
}

// Elbow chain points for rendering: shoulder, intermediate joints, EE.
inline std::vector<Vec3> arm_chain_points(const RobotState& r,
                                          const WorldConfig& cfg) {
  int dof = static_cast<int>(r.arm_joints.size());
  double link = cfg.arm_total_length / std::max(1, dof - 1);
  double heading = r.base_yaw + r.arm_joints[0];
  double ch = std::cos(heading), sh = std::sin(heading);
  std::vector<Vec3> pts;
  double phi = 0.0, reach = 0.0, height = cfg.arm_mount_height;
  pts.push_back({r.base_x, r.base_y, height});
  for (int i = 1; i < dof; ++i) {
    phi += r.arm_joints[i];
    reach += link * std::cos(phi);
    height += link * std::sin(phi);
    pts.push_back({r.base_x + reach * ch, r.base_y + reach * sh, height});
  }
  return pts;
}

// Predefined initial arm configuration; panned toward the handle side, which
// depends on the swing direction.
inline std::vector<double> initial_arm_config(Swing swing,
                                              const WorldConfig& cfg) {
  std::vector<double> q(cfg.arm_dof, 0.0);
  q[0] = swing == Swing::kLeft ? -0.25 : 0.25;
  if (cfg.arm_dof >= 2) q[1] = 0.5;
  for (int i = 2; i < cfg.arm_dof; ++i) {
    q[i] = -1.3 / std::max(1, cfg.arm_dof - 2);
  }
  return q;
}

inline void clamp_arm_joints(std::vector<double>& q, const WorldConfig& cfg) {
  if (q.empty()) return;
  q[0] = std::clamp(q[0], -cfg.pan_limit, cfg.pan_limit);
  if (q.size() >= 2) q[1] = std::clamp(q[1], cfg.lift_lo, cfg.lift_hi);
  for (std::size_t i = 2; i < q.size(); ++i) {
    q[i] = std::clamp(q[i], cfg.elbow_lo, cfg.elbow_hi);
  }
}

// ---------------------------------------------------------------------------
// Operations.

inline bool is_success(const WorldState& s, const SceneSpec& /*scene*/,
                       const WorldConfig& cfg = WorldConfig{}) {
  return !s.failed && s.door.open_angle >= cfg.open_threshold &&
         s.robot.base_x >= cfg.doorway_cross_x;
}

// Success is a predicate, not an absorbing state: the episode ends when the
// controller terminates, fails, or times out.
inline bool is_terminal(const WorldState& s,
                        const WorldConfig& cfg = WorldConfig{}) {
  return s.failed || s.step >= cfg.timeout_steps;
}

inline WorldState reset(const SceneSpec& scene, std::uint64_t seed,
                        const WorldConfig& cfg = WorldConfig{}) {
  Rng rng(seed_mix(seed, hash_str(scene.scene_id), 0xD001));
  WorldState s;
  s.robot.base_x = cfg.start_x + rng.uniform(-0.25, 0.25);
  s.robot.base_y = rng.uniform(-0.1, 0.1);
  s.robot.base_yaw = deg2rad(rng.uniform(-5.0, 5.0));
  s.robot.arm_joints = initial_arm_config(scene.swing, cfg);
  s.door = DoorState{};
  return s;
}

// Registry-checked variant: unknown ids surface as ConfigError.
inline WorldState reset(const SceneRegistry& registry,
                        const std::string& scene_id, std::uint64_t seed,
                        const WorldConfig& cfg = WorldConfig{}) {
  return reset(registry.get(scene_id), seed, cfg);
}

inline WorldState step(const WorldState& state, const Action& action,
                       const SceneSpec& scene,
                       const WorldConfig& cfg = WorldConfig{}) {
  if (static_cast<int>(action.arm.size()) != cfg.arm_dof) {
    throw ContractViolation(
        "step: action arm dimension " + std::to_string(action.arm.size()) +
        " != arm_dof " + std::to_string(cfg.arm_dof));
  }
  if (is_terminal(state, cfg)) {
    throw ContractViolation("step: state is terminal");
  }

  double gain = cfg.variant_gain(scene.dynamics_variant);
  double v = std::clamp(action.base[0], -cfg.v_limit, cfg.v_limit);
  double yr = std::clamp(action.base[1], -cfg.yaw_rate_limit,
                         cfg.yaw_rate_limit);

  WorldState s = state;
  Vec3 ee_before = end_effector(s.robot, cfg);

  // Base integration (translate with the pre-update heading).
  double fx = std::cos(s.robot.base_yaw), fy = std::sin(s.robot.base_yaw);
  double new_x = s.robot.base_x + fx * v * gain * cfg.dt;
  double new_y = s.robot.base_y + fy * v * gain * cfg.dt;
  s.robot.base_yaw += yr * gain * cfg.dt;
  if (s.robot.base_yaw > kPi) s.robot.base_yaw -= 2.0 * kPi;
  if (s.robot.base_yaw < -kPi) s.robot.base_yaw += 2.0 * kPi;

  double half_w = scene.door_width / 2.0;
  double lane = half_w - cfg.robot_radius;
  bool in_lane = std::abs(new_y) <= lane;

  // An unlatched door that is not yet open enough blocks the base; the base
  // presses against it instead of passing.
  if (!s.door.latched && s.door.open_angle < cfg.open_threshold && in_lane) {
    new_x = std::min(new_x, -cfg.robot_radius);
  }
  s.robot.base_x = new_x;
  s.robot.base_y = new_y;

  double front = s.robot.base_x + cfg.robot_radius;
  if (front > 0.0 && !in_lane) {
    s.failed = true;
    s.failure_reason = FailureReason::kCollision;
  } else if (front > 0.0 && s.door.latched) {
    // Driving into a latched door.
    s.failed = true;
    s.failure_reason = FailureReason::kCollision;
  }

  // Arm integration.
  for (int i = 0; i < cfg.arm_dof; ++i) {
    double dq = std::clamp(action.arm[i], -cfg.arm_delta_limit,
                           cfg.arm_delta_limit);
    s.robot.arm_joints[i] += dq * gain;
  }
  clamp_arm_joints(s.robot.arm_joints, cfg);
  Vec3 ee_after = end_effector(s.robot, cfg);

  // Handle: pressing the lever tip downward rotates the handle.
  if (!s.failed && s.door.latched) {
    Vec3 tip = lever_tip_point(scene, s.door.open_angle, s.door.handle_angle,
                               cfg);
    if (dist3(ee_after, tip) < cfg.grasp_radius) {
      double descent = std::max(0.0, ee_before.z - ee_after.z);
      s.door.handle_angle = std::min(cfg.handle_max,
                                     s.door.handle_angle +
                                         cfg.handle_gain * descent);
    }
    if (s.door.handle_angle >= cfg.unlatch_threshold) {
      s.door.latched = false;
    }
  }

  // Door push: forward base or EE motion at the plane swings the door open.
  if (!s.failed && !s.door.latched && s.door.open_angle < kPi / 2.0) {
    double opened = 0.0;
    if (v > 0.0 && std::abs(s.robot.base_y) < half_w &&
        s.robot.base_x + cfg.robot_radius >= -cfg.push_band) {
      opened += cfg.push_gain * v * gain * cfg.dt;
    }
    double dx_ee = ee_after.x - ee_before.x;
    if (dx_ee > 0.0 && std::abs(ee_after.y) < half_w && ee_after.x >= -0.1 &&
        ee_after.z > 0.1 && ee_after.z < cfg.door_height) {
      opened += cfg.push_gain * dx_ee;
    }
    s.door.open_angle = std::min(kPi / 2.0, s.door.open_angle + opened);
  }

  s.step += 1;
  if (!s.failed && s.step >= cfg.timeout_steps &&
      !is_success(s, scene, cfg)) {
    s.failed = true;
    s.failure_reason = FailureReason::kTimeout;
  }
  return s;
}

}  // namespace doorlab

#endif  // DOORLAB_WORLD_HPP_
