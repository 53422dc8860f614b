#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pmgf/joints.hpp"

namespace pmgf {

// Frames x 15 joints x 3 axes, row-major, millimetres.
class JointPositions {
 public:
  JointPositions() = default;
  explicit JointPositions(std::size_t frames) : frames_(frames), values_(frames * kCoordsPerFrame, 0.0) {}
  JointPositions(std::size_t frames, std::vector<double> values);

  std::size_t frames() const { return frames_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double& at(std::size_t frame, JointId j, std::size_t axis) {
    return values_[frame * kCoordsPerFrame + index(j) * kAxes + axis];
  }
  double at(std::size_t frame, JointId j, std::size_t axis) const {
    return values_[frame * kCoordsPerFrame + index(j) * kAxes + axis];
  }

  Eigen::Vector3d point(std::size_t frame, JointId j) const {
    const double* p = &values_[frame * kCoordsPerFrame + index(j) * kAxes];
    return {p[0], p[1], p[2]};
  }
  void set_point(std::size_t frame, JointId j, const Eigen::Vector3d& p);

  // One scalar time series: coordinate `axis` of joint `j` over all frames.
  std::vector<double> series(JointId j, std::size_t axis) const;
  void set_series(JointId j, std::size_t axis, std::span<const double> s);

  bool all_finite() const;

  friend bool operator==(const JointPositions&, const JointPositions&) = default;

 private:
  std::size_t frames_ = 0;
  std::vector<double> values_;
};

struct RawCapture {
  JointPositions positions;
  double sample_rate_hz = 0.0;
  std::string athlete_id;
  std::string trial_id;
  Side throwing_side = Side::kRight;
  double ball_velocity_mph = 0.0;

  std::size_t frames() const { return positions.frames(); }
  // F >= 2, sample_rate > 0, finite positions.
  void validate() const;
};

inline constexpr std::size_t kNormalizedFrames = 101;
inline constexpr double kWindowBeforeReleaseS = 1.0;
inline constexpr double kWindowAfterReleaseS = 0.2;
inline constexpr double kWindowS = kWindowBeforeReleaseS + kWindowAfterReleaseS;
// round(100 * 1.0 / 1.2)
inline constexpr std::size_t kReleaseFrame = 83;
// 1.2 s / 100 intervals
inline constexpr double kFrameDtS = kWindowS / static_cast<double>(kNormalizedFrames - 1);

struct MotionSequence {
  JointPositions positions{kNormalizedFrames};
  std::size_t release_frame = kReleaseFrame;
  std::string athlete_id;
  std::string trial_id;
  Side throwing_side = Side::kRight;
  double ball_velocity_mph = 0.0;

  Eigen::Vector3d point(std::size_t frame, JointId j) const { return positions.point(frame, j); }

  // 101 frames, release_frame <= 100, finite positions.
  void validate() const;

  friend bool operator==(const MotionSequence&, const MotionSequence&) = default;
};

// Per-(joint, axis) standardization statistics over every frame of every
// training sequence.
struct Scaler {
  std::vector<double> mean = std::vector<double>(kCoordsPerFrame, 0.0);
  std::vector<double> std = std::vector<double>(kCoordsPerFrame, 1.0);

  void validate() const;
};

inline constexpr double kScalerStdFloor = 1e-6;

// Mirrors a left-handed capture across the x-y plane and swaps left/right
// labels so that it reads as a right-handed throw. Right-handed input is
// returned unchanged.
RawCapture to_right_handed(const RawCapture& raw);
MotionSequence to_right_handed(const MotionSequence& seq);

// Copies coordinates into a (45 x frames) column-per-frame matrix, the layout
// the VAE consumes.
Eigen::MatrixXd to_matrix(const MotionSequence& seq);
void from_matrix(const Eigen::MatrixXd& m, MotionSequence& seq);

}  // namespace pmgf
