#include "pmgf/motion.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "pmgf/errors.hpp"

namespace pmgf {

std::optional<JointId> joint_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kJointCount; ++i) {
    if (kJointNames[i] == name) return static_cast<JointId>(i);
  }
  return std::nullopt;
}

JointId mirror_joint(JointId j) {
  if (j == JointId::kHead) return j;
  // Paired joints alternate L, R starting at index 1.
  const std::size_t i = index(j);
  return static_cast<JointId>(i % 2 == 1 ? i + 1 : i - 1);
}

std::string_view to_string(Side s) { return s == Side::kLeft ? "left" : "right"; }

Side side_from_string(std::string_view s) {
  if (s == "left" || s == "L" || s == "l") return Side::kLeft;
  if (s == "right" || s == "R" || s == "r") return Side::kRight;
  throw ValidationError("throwing_side must be 'left' or 'right', got '" + std::string(s) + "'");
}

SideJoints side_joints(Side throwing_side) {
  if (throwing_side == Side::kRight) {
    return {JointId::kShoulderR, JointId::kElbowR, JointId::kWristR, JointId::kHipR, JointId::kShoulderL,
            JointId::kHipL,      JointId::kKneeL,  JointId::kHeelL,  JointId::kHeelR, 1.0};
  }
  return {JointId::kShoulderL, JointId::kElbowL, JointId::kWristL, JointId::kHipL, JointId::kShoulderR,
          JointId::kHipR,      JointId::kKneeR,  JointId::kHeelR,  JointId::kHeelL, -1.0};
}

JointPositions::JointPositions(std::size_t frames, std::vector<double> values)
    : frames_(frames), values_(std::move(values)) {
  require(values_.size() == frames_ * kCoordsPerFrame,
          "joint position buffer has " + std::to_string(values_.size()) + " values, expected " +
              std::to_string(frames_ * kCoordsPerFrame));
}

void JointPositions::set_point(std::size_t frame, JointId j, const Eigen::Vector3d& p) {
  double* dst = &values_[frame * kCoordsPerFrame + index(j) * kAxes];
  dst[0] = p.x();
  dst[1] = p.y();
  dst[2] = p.z();
}

std::vector<double> JointPositions::series(JointId j, std::size_t axis) const {
  std::vector<double> s(frames_);
  for (std::size_t f = 0; f < frames_; ++f) s[f] = at(f, j, axis);
  return s;
}

void JointPositions::set_series(JointId j, std::size_t axis, std::span<const double> s) {
  require(s.size() == frames_, "series length does not match frame count");
  for (std::size_t f = 0; f < frames_; ++f) at(f, j, axis) = s[f];
}

bool JointPositions::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void RawCapture::validate() const {
  require(positions.frames() >= 2, "raw capture needs at least 2 frames");
  require(sample_rate_hz > 0.0 && std::isfinite(sample_rate_hz), "sample rate must be positive");
  require(positions.all_finite(), "raw capture contains non-finite positions");
}

void MotionSequence::validate() const {
  require(positions.frames() == kNormalizedFrames,
          "motion sequence must have 101 frames, has " + std::to_string(positions.frames()));
  require(release_frame < kNormalizedFrames, "release_frame out of range");
  require(positions.all_finite(), "motion sequence contains non-finite positions");
}

void Scaler::validate() const {
  require(mean.size() == kCoordsPerFrame && std.size() == kCoordsPerFrame, "scaler must hold 45 means and stds");
  for (std::size_t i = 0; i < kCoordsPerFrame; ++i) {
    require(std::isfinite(mean[i]), "scaler mean is not finite");
    require(std[i] > 0.0 && std::isfinite(std[i]), "scaler std must be positive");
  }
}

namespace {

JointPositions mirrored(const JointPositions& in) {
  JointPositions out(in.frames());
  for (std::size_t f = 0; f < in.frames(); ++f) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const auto src = static_cast<JointId>(j);
      Eigen::Vector3d p = in.point(f, src);
      p.z() = -p.z();
      out.set_point(f, mirror_joint(src), p);
    }
  }
  return out;
}

}  // namespace

RawCapture to_right_handed(const RawCapture& raw) {
  if (raw.throwing_side == Side::kRight) return raw;
  RawCapture out = raw;
  out.positions = mirrored(raw.positions);
  out.throwing_side = Side::kRight;
  return out;
}

MotionSequence to_right_handed(const MotionSequence& seq) {
  if (seq.throwing_side == Side::kRight) return seq;
  MotionSequence out = seq;
  out.positions = mirrored(seq.positions);
  out.throwing_side = Side::kRight;
  return out;
}

Eigen::MatrixXd to_matrix(const MotionSequence& seq) {
  const std::size_t frames = seq.positions.frames();
  Eigen::MatrixXd m(kCoordsPerFrame, frames);
  const auto v = seq.positions.values();
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < kCoordsPerFrame; ++c) m(c, f) = v[f * kCoordsPerFrame + c];
  }
  return m;
}

void from_matrix(const Eigen::MatrixXd& m, MotionSequence& seq) {
  require(m.rows() == static_cast<Eigen::Index>(kCoordsPerFrame), "matrix must have 45 rows");
  const auto frames = static_cast<std::size_t>(m.cols());
  JointPositions p(frames);
  auto v = p.values();
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t c = 0; c < kCoordsPerFrame; ++c) v[f * kCoordsPerFrame + c] = m(c, f);
  }
  seq.positions = std::move(p);
}

}  // namespace pmgf
