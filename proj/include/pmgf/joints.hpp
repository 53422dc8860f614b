#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace pmgf {

// Landmark order is the in-memory and on-disk column order.
enum class JointId : std::size_t {
  kHead = 0,
  kShoulderL,
  kShoulderR,
  kElbowL,
  kElbowR,
  kWristL,
  kWristR,
  kHipL,
  kHipR,
  kKneeL,
  kKneeR,
  kHeelL,
  kHeelR,
  kToeL,
  kToeR,
};

inline constexpr std::size_t kJointCount = 15;
inline constexpr std::size_t kAxes = 3;
inline constexpr std::size_t kCoordsPerFrame = kJointCount * kAxes;

inline constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "head",   "shoulder_L", "shoulder_R", "elbow_L", "elbow_R",
    "wrist_L", "wrist_R",   "hip_L",      "hip_R",   "knee_L",
    "knee_R", "heel_L",     "heel_R",     "toe_L",   "toe_R"};

constexpr std::size_t index(JointId j) { return static_cast<std::size_t>(j); }

constexpr std::string_view name(JointId j) { return kJointNames[index(j)]; }

std::optional<JointId> joint_from_name(std::string_view name);

// Left/right counterpart; the head maps to itself.
JointId mirror_joint(JointId j);

enum class Side { kLeft, kRight };

std::string_view to_string(Side s);
Side side_from_string(std::string_view s);

// Joints resolved for a thrower: the throwing arm and the pivot leg are
// ipsilateral, the stride leg is contralateral.
struct SideJoints {
  JointId throwing_shoulder, throwing_elbow, throwing_wrist, throwing_hip;
  JointId glove_shoulder;
  JointId stride_hip, stride_knee, stride_heel;
  JointId pivot_heel;
  // +1 for right-handed throwers, -1 for left-handed ones. Multiplies the
  // lateral (z) axis so that sign conventions match after mirroring.
  double lateral_sign;
};

SideJoints side_joints(Side throwing_side);

// Bones drawn by the stick-figure renderer.
inline constexpr std::array<std::array<JointId, 2>, 16> kBones = {{
    {JointId::kShoulderL, JointId::kShoulderR},
    {JointId::kShoulderL, JointId::kElbowL},
    {JointId::kElbowL, JointId::kWristL},
    {JointId::kShoulderR, JointId::kElbowR},
    {JointId::kElbowR, JointId::kWristR},
    {JointId::kHipL, JointId::kHipR},
    {JointId::kShoulderL, JointId::kHipL},
    {JointId::kShoulderR, JointId::kHipR},
    {JointId::kHipL, JointId::kKneeL},
    {JointId::kKneeL, JointId::kHeelL},
    {JointId::kHeelL, JointId::kToeL},
    {JointId::kHipR, JointId::kKneeR},
    {JointId::kKneeR, JointId::kHeelR},
    {JointId::kHeelR, JointId::kToeR},
    {JointId::kHead, JointId::kShoulderL},
    {JointId::kHead, JointId::kShoulderR},
}};

}  // namespace pmgf
