#include "pmgf/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>
#include <json.hpp>

#include "pmgf/errors.hpp"

namespace pmgf {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

bool in_range(double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; }

}  // namespace

void FeatureVector::validate() const {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    require(std::isfinite(values[i]), "feature " + std::string(kFeatureNames[i]) + " is not finite");
  }
  for (Feature f : {Feature::kShoulderAbduction, Feature::kForwardTrunkTilt, Feature::kKneeExtension}) {
    require(in_range((*this)[f], 0.0, 180.0), std::string(kFeatureNames[static_cast<std::size_t>(f)]) + " outside [0, 180]");
  }
  require(in_range((*this)[Feature::kLateralTrunkTilt], -180.0, 180.0), "lateral_trunk_tilt outside [-180, 180]");
  require((*this)[Feature::kShoulderJointMovement] >= 0.0, "shoulder_joint_movement negative");
  require((*this)[Feature::kStrideLength] >= 0.0, "stride_length negative");
}

std::array<double, kFeatureCount> DeltaNormalization::scales(const FeatureVector& f_ori) const {
  std::array<double, kFeatureCount> d{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    switch (rule[i]) {
      case NormalizationRule::kRelativeToOriginal:
        d[i] = std::abs(f_ori[i]) + relative_epsilon;
        break;
      case NormalizationRule::kPi:
        // Features are stored in degrees; (deg * pi / 180) / pi == deg / 180.
        d[i] = 180.0;
        break;
      case NormalizationRule::kFixed:
        d[i] = fixed_scale[i];
        break;
    }
    require(d[i] > 0.0, "delta normalization scale must be positive");
  }
  return d;
}

double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b)) * kRadToDeg;
}

double wrap_angle(double radians) {
  double r = std::remainder(radians, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

double line_heading(const MotionSequence& seq, std::size_t frame, JointId from, JointId to) {
  const Eigen::Vector3d v = seq.point(frame, to) - seq.point(frame, from);
  return std::atan2(v.z(), v.x());
}

namespace {

// Per-interval horizontal angular speed (rad/frame) of a joint-to-joint line.
std::vector<double> heading_speed(const MotionSequence& seq, JointId from, JointId to) {
  const std::size_t n = seq.positions.frames();
  std::vector<double> speed(n - 1);
  double prev = line_heading(seq, 0, from, to);
  for (std::size_t f = 0; f + 1 < n; ++f) {
    const double next = line_heading(seq, f + 1, from, to);
    speed[f] = std::abs(wrap_angle(next - prev));
    prev = next;
  }
  return speed;
}

std::size_t first_argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

}  // namespace

FeatureVector extract_features(const MotionSequence& seq) {
  const std::size_t frames = seq.positions.frames();
  require(frames >= 2, "feature extraction needs at least 2 frames");
  const std::size_t r = seq.release_frame;
  require(r >= kPreReleaseWindow, "release_frame < 10 leaves the pre-release window undefined");
  require(r < frames, "release_frame outside the sequence");
  const SideJoints sj = side_joints(seq.throwing_side);
  const Eigen::Vector3d up = Eigen::Vector3d::UnitY();

  FeatureVector out;

  double path = 0.0;
  for (std::size_t f = r - kPreReleaseWindow; f < r; ++f) {
    path += (seq.point(f + 1, sj.glove_shoulder) - seq.point(f, sj.glove_shoulder)).norm();
  }
  out[Feature::kShoulderJointMovement] = path;

  double abduction = 0.0;
  for (std::size_t f = r - kPreReleaseWindow; f < r; ++f) {
    const Eigen::Vector3d s = seq.point(f, sj.throwing_shoulder);
    abduction += angle_between_deg(seq.point(f, sj.throwing_hip) - s, seq.point(f, sj.throwing_elbow) - s);
  }
  out[Feature::kShoulderAbduction] = abduction / static_cast<double>(kPreReleaseWindow);

  // Trunk elevation measured from the backward horizontal, so that leaning
  // toward the target reads above 90 deg. "Forward" is perpendicular to the
  // pelvis line in the horizontal plane.
  {
    const Eigen::Vector3d hips = 0.5 * (seq.point(r, JointId::kHipL) + seq.point(r, JointId::kHipR));
    const Eigen::Vector3d shoulders = 0.5 * (seq.point(r, JointId::kShoulderL) + seq.point(r, JointId::kShoulderR));
    const Eigen::Vector3d trunk = shoulders - hips;
    Eigen::Vector3d pelvis = seq.point(r, sj.throwing_hip) - seq.point(r, sj.stride_hip);
    pelvis.y() = 0.0;
    Eigen::Vector3d forward = sj.lateral_sign * up.cross(pelvis);
    forward = forward.norm() > 0.0 ? Eigen::Vector3d(forward.normalized()) : Eigen::Vector3d::UnitX();
    out[Feature::kForwardTrunkTilt] = std::atan2(trunk.y(), -trunk.dot(forward)) * kRadToDeg;
  }

  {
    const Eigen::Vector3d v = seq.point(r, JointId::kHead) - seq.point(r, sj.stride_heel);
    out[Feature::kLateralTrunkTilt] = std::atan2(-sj.lateral_sign * v.z(), v.y()) * kRadToDeg;
  }

  const std::vector<double> hip_speed = heading_speed(seq, JointId::kHipL, JointId::kHipR);
  const std::vector<double> shoulder_speed = heading_speed(seq, JointId::kShoulderL, JointId::kShoulderR);
  out[Feature::kMaxTrunkRotVelocity] = *std::max_element(hip_speed.begin(), hip_speed.end()) / kFrameDtS * kRadToDeg;
  const double frame_gap =
      static_cast<double>(first_argmax(shoulder_speed)) - static_cast<double>(first_argmax(hip_speed));
  out[Feature::kHipShoulderDelay] = frame_gap * kFrameDtS * 1000.0;

  {
    const Eigen::Vector3d knee = seq.point(r, sj.stride_knee);
    out[Feature::kKneeExtension] =
        angle_between_deg(seq.point(r, sj.stride_hip) - knee, seq.point(r, sj.stride_heel) - knee);
  }

  out[Feature::kStrideLength] = (seq.point(0, sj.pivot_heel) - seq.point(r, sj.stride_heel)).norm();

  for (double v : out.values) {
    if (!std::isfinite(v)) throw NumericalError("non-finite feature value");
  }
  return out;
}

std::array<double, kFeatureCount> delta(const FeatureVector& f_ori, const FeatureVector& f_rec,
                                        const DeltaNormalization& norms) {
  const auto d = norms.scales(f_ori);
  std::array<double, kFeatureCount> out{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) out[i] = (f_rec[i] - f_ori[i]) / d[i];
  return out;
}

std::string feature_csv_header() {
  std::string h = "trial_id,athlete_id";
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    h += ",F" + std::to_string(i + 1) + "_" + std::string(kFeatureNames[i]) + "_" + std::string(kFeatureUnits[i]);
  }
  return h;
}

void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureRow> rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << feature_csv_header() << '\n';
  char buf[32];
  for (const auto& row : rows) {
    out << row.trial_id << ',' << row.athlete_id;
    for (double v : row.features.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

std::vector<FeatureRow> read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != feature_csv_header()) throw ValidationError(path.string() + ": bad feature CSV header");
  std::vector<FeatureRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    FeatureRow row;
    std::string cell;
    std::getline(ss, row.trial_id, ',');
    std::getline(ss, row.athlete_id, ',');
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      if (!std::getline(ss, cell, ',')) throw ValidationError(path.string() + ": short feature row");
      try {
        row.features[i] = std::stod(cell);
      } catch (const std::exception&) {
        throw ValidationError(path.string() + ": bad number '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_feature_json(const std::filesystem::path& path, const FeatureVector& f) {
  nlohmann::json j;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    j[std::string(kFeatureNames[i])] = {{"value", f[i]}, {"unit", std::string(kFeatureUnits[i])}};
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

FeatureVector read_feature_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  FeatureVector f;
  try {
    nlohmann::json j;
    in >> j;
    for (std::size_t i = 0; i < kFeatureCount; ++i) f[i] = j.at(std::string(kFeatureNames[i])).at("value").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return f;
}

}  // namespace pmgf
