#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "pmgf/motion.hpp"

namespace pmgf {

inline constexpr std::size_t kFeatureCount = 8;

enum class Feature : std::size_t {
  kShoulderJointMovement = 0,  // F1, mm
  kShoulderAbduction,          // F2, deg
  kForwardTrunkTilt,           // F3, deg
  kLateralTrunkTilt,           // F4, deg
  kMaxTrunkRotVelocity,        // F5, deg/s
  kHipShoulderDelay,           // F6, ms
  kKneeExtension,              // F7, deg
  kStrideLength,               // F8, mm
};

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "shoulder_joint_movement", "shoulder_abduction", "forward_trunk_tilt", "lateral_trunk_tilt",
    "max_trunk_rot_velocity",  "hip_shoulder_delay", "knee_extension",     "stride_length"};

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureUnits = {"mm",    "deg", "deg", "deg",
                                                                              "deg/s", "ms",  "deg", "mm"};

// Frames before release covered by the F1/F2 windows; also the F6 scale.
inline constexpr std::size_t kPreReleaseWindow = 10;

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double& operator[](Feature f) { return values[static_cast<std::size_t>(f)]; }
  double operator[](Feature f) const { return values[static_cast<std::size_t>(f)]; }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  // Finite; F2, F3, F7 in [0, 180]; F4 in [-180, 180]; F1, F8 >= 0.
  void validate() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

enum class NormalizationRule {
  kRelativeToOriginal,  // |f_ori| + 1e-6
  kPi,                  // angle in radians divided by pi
  kFixed,               // constant scale in the feature's own unit
};

struct DeltaNormalization {
  std::array<NormalizationRule, kFeatureCount> rule = {
      NormalizationRule::kRelativeToOriginal, NormalizationRule::kPi, NormalizationRule::kPi,
      NormalizationRule::kPi, NormalizationRule::kRelativeToOriginal, NormalizationRule::kFixed,
      NormalizationRule::kPi, NormalizationRule::kRelativeToOriginal};
  // Used by kFixed: 10 frames x 12 ms.
  std::array<double, kFeatureCount> fixed_scale = {0, 0, 0, 0, 0, kPreReleaseWindow * kFrameDtS * 1000.0, 0, 0};
  double relative_epsilon = 1e-6;

  // d_i for a given original feature vector; always > 0.
  std::array<double, kFeatureCount> scales(const FeatureVector& f_ori) const;
};

// Geometry helpers shared with the renderer and tests.
double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b);
double wrap_angle(double radians);

// Horizontal-plane angle of the hip_L -> hip_R (or shoulder) line, radians.
double line_heading(const MotionSequence& seq, std::size_t frame, JointId from, JointId to);

FeatureVector extract_features(const MotionSequence& seq);

// Delta_i = (f_rec,i - f_ori,i) / d_i.
std::array<double, kFeatureCount> delta(const FeatureVector& f_ori, const FeatureVector& f_rec,
                                        const DeltaNormalization& norms = {});

// One row per trial: trial_id, athlete_id, F1..F8 (headers carry units).
struct FeatureRow {
  std::string trial_id;
  std::string athlete_id;
  FeatureVector features;
};

std::string feature_csv_header();
void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows);
std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path);

// Ground-truth sidecar (JSON object keyed by feature name).
void write_feature_json(const std::filesystem::path& path, const FeatureVector& f);
FeatureVector read_feature_json(const std::filesystem::path& path);

}  // namespace pmgf
