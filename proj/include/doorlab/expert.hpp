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

#ifndef DOORLAB_EXPERT_HPP_
#define DOORLAB_EXPERT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doorlab/rng.hpp"
#include "doorlab/scene.hpp"
#include "doorlab/world.hpp"

namespace doorlab {

// Scripted demonstrator. A phase machine over the world state drives the
// base to a handle-side station, servoes the end effector onto the lever,
// turns it down past the unlatch threshold, pushes the door open with the
// base, enters, and terminates.

enum class ExpertPhase {
  kApproach,
  kReach,
  kTurn,
  kPush,
  kEnter,
  kTerminate,
};

inline const char* to_string(ExpertPhase p) {
  switch (p) {
    case ExpertPhase::kApproach: return "approach";
    case ExpertPhase::kReach: return "reach";
    case ExpertPhase::kTurn: return "turn";
    case ExpertPhase::kPush: return "push";
    case ExpertPhase::kEnter: return "enter";
    default: return "terminate";
  }
}

struct ExpertParams {
  double station_x = -0.5;
  double station_tol = 0.08;
  double press_engage_radius = 0.14;  // switch from reach to turn inside this
  double enter_x = 0.35;              // terminate once past this
  double drive_gain = 1.6;
  double steer_gain = 3.0;
  double descend_depth = 0.3;  // turn target sits this far below the EE
  // Demo diversity jitter (standard deviations).
  double jitter_v = 0.01;
  double jitter_yaw = 0.01;
  double jitter_arm = 0.002;
};

namespace detail {

inline double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

// Numerical Jacobian of the EE position w.r.t. the arm joints.
inline void arm_jacobian(const RobotState& r, const WorldConfig& cfg,
                         std::vector<std::array<double, 3>>& jac) {
  const double h = 1e-5;
  Vec3 base = end_effector(r, cfg);
  int dof = static_cast<int>(r.arm_joints.size());
  jac.assign(dof, {0.0, 0.0, 0.0});
  RobotState probe = r;
  for (int i = 0; i < dof; ++i) {
    probe.arm_joints[i] = r.arm_joints[i] + h;
    Vec3 p = end_effector(probe, cfg);
    probe.arm_joints[i] = r.arm_joints[i];
    jac[i] = {(p.x - base.x) / h, (p.y - base.y) / h, (p.z - base.z) / h};
  }
}

// Jacobian-transpose servo step toward a cartesian target, scaled to the
// per-step joint delta limit.
inline std::vector<double> servo_arm(const RobotState& r, const Vec3& target,
                                     const WorldConfig& cfg) {
  Vec3 ee = end_effector(r, cfg);
  std::array<double, 3> err{target.x - ee.x, target.y - ee.y, target.z - ee.z};
  std::vector<std::array<double, 3>> jac;
  arm_jacobian(r, cfg, jac);
  int dof = static_cast<int>(jac.size());
  std::vector<double> dq(dof, 0.0);
  double peak = 0.0;
  for (int i = 0; i < dof; ++i) {
    dq[i] = jac[i][0] * err[0] + jac[i][1] * err[1] + jac[i][2] * err[2];
    peak = std::max(peak, std::abs(dq[i]));
  }
  if (peak > 1e-9) {
    double scale = cfg.arm_delta_limit / peak;
    double err_norm = std::sqrt(err[0] * err[0] + err[1] * err[1] +
                                err[2] * err[2]);
    // Slow down close to the target to avoid limit-cycling around it.
    scale *= std::min(1.0, err_norm / 0.05);
    for (double& q : dq) q *= scale;
  }
  return dq;
}

inline void drive_to(const WorldState& s, double tx, double ty,
                     const WorldConfig& cfg, const ExpertParams& p,
                     Action& a) {
  double ex = tx - s.robot.base_x;
  double ey = ty - s.robot.base_y;
  double dist = std::sqrt(ex * ex + ey * ey);
  double desired = dist > 0.05 ? std::atan2(ey, ex) : 0.0;
  double herr = wrap_angle(desired - s.robot.base_yaw);
  a.base[1] = std::clamp(p.steer_gain * herr, -cfg.yaw_rate_limit,
                         cfg.yaw_rate_limit);
  double v = std::abs(herr) < 0.5 ? p.drive_gain * dist : 0.0;
  a.base[0] = std::clamp(v, 0.0, cfg.v_limit);
}

inline void retract_arm(const WorldState& s, const WorldConfig& cfg,
                        Action& a) {
  std::vector<double> home = initial_arm_config(
      s.robot.arm_joints[0] < 0 ? Swing::kLeft : Swing::kRight, cfg);
  for (int i = 0; i < cfg.arm_dof; ++i) {
    a.arm[i] = std::clamp(0.4 * (home[i] - s.robot.arm_joints[i]),
                          -cfg.arm_delta_limit, cfg.arm_delta_limit);
  }
}

}  // namespace detail

inline ExpertPhase expert_phase(const WorldState& s, const SceneSpec& scene,
                                const WorldConfig& cfg = WorldConfig{},
                                const ExpertParams& p = ExpertParams{}) {
  if (s.robot.base_x >= p.enter_x &&
      s.door.open_angle >= cfg.open_threshold) {
    return ExpertPhase::kTerminate;
  }
  if (!s.door.latched) {
    return s.door.open_angle < cfg.open_threshold ? ExpertPhase::kPush
                                                  : ExpertPhase::kEnter;
  }
  Vec3 tip = lever_tip_point(scene, s.door.open_angle, s.door.handle_angle,
                             cfg);
  Vec3 ee = end_effector(s.robot, cfg);
  if (dist3(ee, tip) < p.press_engage_radius) return ExpertPhase::kTurn;
  Vec3 tip0 = lever_tip_point(scene, 0.0, 0.0, cfg);
  double dx = s.robot.base_x - p.station_x;
  double dy = s.robot.base_y - tip0.y;
  if (std::sqrt(dx * dx + dy * dy) < p.station_tol &&
      std::abs(s.robot.base_yaw) < 0.1) {
    return ExpertPhase::kReach;
  }
  return ExpertPhase::kApproach;
}

// The proportional controller for one phase. Jitter-free and a pure function
// of the state, so replaying a recorded trajectory reproduces it exactly.
inline Action expert_action_for_phase(ExpertPhase phase, const WorldState& s,
                                      const SceneSpec& scene,
                                      const WorldConfig& cfg = WorldConfig{},
                                      const ExpertParams& p = ExpertParams{}) {
  Action a = Action::zero(cfg.arm_dof);
  switch (phase) {
    case ExpertPhase::kApproach: {
      Vec3 tip0 = lever_tip_point(scene, 0.0, 0.0, cfg);
      detail::drive_to(s, p.station_x, tip0.y, cfg, p, a);
      break;
    }
    case ExpertPhase::kReach: {
      Vec3 tip = lever_tip_point(scene, s.door.open_angle,
                                 s.door.handle_angle, cfg);
      a.arm = detail::servo_arm(s.robot, tip, cfg);
      break;
    }
    case ExpertPhase::kTurn: {
      Vec3 tip = lever_tip_point(scene, s.door.open_angle,
                                 s.door.handle_angle, cfg);
      Vec3 ee = end_effector(s.robot, cfg);
      Vec3 target{tip.x, tip.y, ee.z - p.descend_depth};
      a.arm = detail::servo_arm(s.robot, target, cfg);
      break;
    }
    case ExpertPhase::kPush: {
      detail::drive_to(s, 0.3, 0.0, cfg, p, a);
      detail::retract_arm(s, cfg, a);
      break;
    }
    case ExpertPhase::kEnter: {
      detail::drive_to(s, p.enter_x + 0.3, 0.0, cfg, p, a);
      detail::retract_arm(s, cfg, a);
      break;
    }
    case ExpertPhase::kTerminate: {
      a.terminate = true;
      break;
    }
  }
  return a;
}

inline Action expert_action(const WorldState& s, const SceneSpec& scene,
                            const WorldConfig& cfg = WorldConfig{},
                            const ExpertParams& p = ExpertParams{}) {
  return expert_action_for_phase(expert_phase(s, scene, cfg, p), s, scene,
                                 cfg, p);
}

// Episode-scoped expert: adds seeded jitter for demonstration diversity and
// holds a phase floor so the phase sequence is monotone even when jitter
// nudges the state back across a phase boundary.
class ExpertPolicy {
 public:
  explicit ExpertPolicy(std::uint64_t jitter_seed,
                        WorldConfig cfg = WorldConfig{},
                        ExpertParams params = ExpertParams{})
      : rng_(seed_mix(jitter_seed, 0xE4)), cfg_(cfg), params_(params) {}

  ExpertPhase phase(const WorldState& s, const SceneSpec& scene) {
    ExpertPhase raw = expert_phase(s, scene, cfg_, params_);
    if (static_cast<int>(raw) > static_cast<int>(floor_)) floor_ = raw;
    return floor_;
  }

  Action act(const WorldState& s, const SceneSpec& scene) {
    ExpertPhase ph = phase(s, scene);
    Action a = expert_action_for_phase(ph, s, scene, cfg_, params_);
    if (ph == ExpertPhase::kTerminate) {
      return a;  // terminal action is emitted jitter-free
    }
    a.base[0] = std::clamp(a.base[0] + rng_.normal(0.0, params_.jitter_v),
                           -cfg_.v_limit, cfg_.v_limit);
    a.base[1] = std::clamp(a.base[1] + rng_.normal(0.0, params_.jitter_yaw),
                           -cfg_.yaw_rate_limit, cfg_.yaw_rate_limit);
    for (double& dq : a.arm) {
      dq = std::clamp(dq + rng_.normal(0.0, params_.jitter_arm),
                      -cfg_.arm_delta_limit, cfg_.arm_delta_limit);
    }
    return a;
  }

  const WorldConfig& world_config() const { return cfg_; }

 private:
  Rng rng_;
  WorldConfig cfg_;
  ExpertParams params_;
  ExpertPhase floor_ = ExpertPhase::kApproach;
};

}  // namespace doorlab

#endif  // DOORLAB_EXPERT_HPP_
