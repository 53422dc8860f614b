#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pmgf/features.hpp"
#include "pmgf/motion.hpp"

namespace pmgf {

struct SegmentLengths {
  double thigh = 450, shank = 425, hip_width = 300, shoulder_width = 370, trunk = 500, head = 250,
         upper_arm = 300, forearm = 270, foot = 250;
};

// Everything needed to regenerate one synthetic pitch. Angles in degrees,
// times in seconds relative to release, lengths in mm.
struct PitchParams {
  SegmentLengths segments;
  Side throwing_side = Side::kRight;

  // Feature targets enforced by construction (F1 is whatever the shoulder
  // rotation produces and is not a parameter).
  double abduction_deg = 95;         // F2 over the pre-release window
  double trunk_tilt_deg = 108;       // F3 at release
  double lateral_tilt_deg = 14;      // F4 at release
  double hip_peak_speed_deg_s = 640; // F5 continuous-time peak
  double hip_shoulder_delay_s = 0.04;// F6
  double knee_angle_deg = 157;       // F7 at release
  double stride_length_mm = 1475;    // F8

  double leg_lean_deg = 15;          // stride shank-to-hip line behind vertical at release
  double stride_lateral_mm = -30;    // z of the stride heel at landing
  double hip_peak_time_s = -0.17;
  double hip_start_heading_deg = 178;
  double shoulder_start_heading_deg = 185;
  double shoulder_speed_gain = 1.7;  // shoulder peak / hip peak angular speed
  double hip_halfwidth_s = 0.11;
  double shoulder_halfwidth_s = 0.065;
  double lift_height_mm = 330;
  double whip_sigma_s = 0.021;

  // Constant per-trial marker offsets (mm). Both hips share one offset and
  // both shoulders share one, which keeps the rotation headings exact.
  std::array<Eigen::Vector3d, kJointCount> marker_offset = [] {
    std::array<Eigen::Vector3d, kJointCount> z;
    z.fill(Eigen::Vector3d::Zero());
    return z;
  }();
};

struct AthleteStyle {
  std::uint64_t style_seed = 0;
  std::string athlete_id;
  PitchParams base;  // marker offsets zero; trials jitter around this
  double mean_ball_velocity_mph = 0;  // noise-free velocity of the base style
};

// Ball velocity = intercept + sum coef_k * (feature_k - center_k) / scale_k
// over stride length, knee extension, forward trunk tilt, and peak trunk
// rotation speed, plus Gaussian noise. Every coefficient is positive.
struct VelocityModel {
  double intercept_mph = 82.0;
  double stride_coef = 2.5, stride_center = 1475, stride_scale = 100;
  double knee_coef = 1.5, knee_center = 157.5, knee_scale = 10;
  double trunk_coef = 1.0, trunk_center = 109, trunk_scale = 10;
  double rotation_coef = 1.5, rotation_center = 640, rotation_scale = 100;
  double noise_sd_mph = 0.7;

  // Noise-free part.
  double predict(const FeatureVector& f) const;
};

struct CohortOptions {
  double marker_noise_mm = 5.0;
  double left_handed_fraction = 0.0;
  VelocityModel velocity;
};

struct SynthTrial {
  MotionSequence sequence;
  FeatureVector ground_truth;
  double ball_velocity_mph = 0;
  PitchParams params;
};

// Deterministic in master_seed. Athletes are ordered; trial ids are
// "<athlete>_T<k>".
std::vector<SynthTrial> make_cohort(int n_athletes, int trials_per_athlete, std::uint64_t master_seed,
                                    const CohortOptions& options = {});

AthleteStyle make_athlete_style(std::uint64_t style_seed, std::string athlete_id, const CohortOptions& options = {});

// Joint positions at time tau (s, release at 0), canonical joint order.
std::array<Eigen::Vector3d, kJointCount> pitch_pose(const PitchParams& p, double tau);

// Samples the 101-frame window with frame 83 at release.
MotionSequence render_sequence(const PitchParams& p);

// Features computed from the analytic kinematics rather than from a sampled
// sequence: angles by the law of cosines, F5 from the closed-form pelvis
// heading, F6 from the designed peak times.
FeatureVector analytic_features(const PitchParams& p);

// Raw capture of a trial at an arbitrary rate covering [-lead_s, tail_s]
// around release, with the release exactly on sample `release_index`
// (returned through the pointer).
RawCapture render_raw_capture(const SynthTrial& trial, double sample_rate_hz, double lead_s, double tail_s,
                              std::size_t* release_index = nullptr);

// Named oracle poses: every frame shares the same posture unless a hip
// rotation rate is given, in which case the pelvis and shoulder lines turn at
// that constant rate throughout.
struct PoseFixtureSpec {
  double knee_angle_deg = 150;     // 180 = collinear stride leg
  double trunk_tilt_deg = 90;      // 90 = shoulders midpoint straight above hips midpoint
  double lateral_tilt_deg = 0;     // head over stride heel in the frontal plane
  double abduction_deg = 90;
  double pelvis_heading_deg = 90;  // heading of hip_L -> hip_R at release
  Eigen::Vector3d pivot_heel_start = Eigen::Vector3d::Zero();
  Eigen::Vector3d stride_heel_release = Eigen::Vector3d(1500, 0, 0);
  double hip_rotation_deg_s = 0;
  Side throwing_side = Side::kRight;
  SegmentLengths segments;
};

MotionSequence make_pose_fixture(const PoseFixtureSpec& spec);

// Writes <dir>/<trial>.motion, <dir>/<trial>.truth.json and
// <dir>/manifest.json.
void write_cohort(const std::filesystem::path& dir, const std::vector<SynthTrial>& trials);

}  // namespace pmgf
