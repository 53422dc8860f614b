#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include <Eigen/Geometry>

#include "pmgf/errors.hpp"
#include "pmgf/features.hpp"
#include "pmgf/synth.hpp"

using namespace pmgf;

namespace {

MotionSequence transformed(const MotionSequence& s, const Eigen::Matrix3d& r, const Eigen::Vector3d& t, double scale = 1) {
  MotionSequence out = s;
  for (std::size_t f = 0; f < kNormalizedFrames; ++f)
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const auto id = static_cast<JointId>(j);
      out.positions.set_point(f, id, scale * (r * s.point(f, id)) + t);
    }
  return out;
}

}  // namespace

TEST_CASE("fixture poses") {
  PoseFixtureSpec s;
  s.knee_angle_deg = 180;
  s.trunk_tilt_deg = 90;
  s.abduction_deg = 90;
  s.lateral_tilt_deg = 0;
  s.stride_heel_release = {1800, 0, 0};
  const FeatureVector f = extract_features(make_pose_fixture(s));
  CHECK(f[Feature::kKneeExtension] == doctest::Approx(180.0).epsilon(1e-9));
  CHECK(f[Feature::kForwardTrunkTilt] == doctest::Approx(90.0).epsilon(1e-9));
  CHECK(f[Feature::kShoulderAbduction] == doctest::Approx(90.0).epsilon(1e-9));
  CHECK(std::abs(f[Feature::kLateralTrunkTilt]) < 1e-9);
  CHECK(f[Feature::kStrideLength] == doctest::Approx(1800.0).epsilon(1e-12));
  // A static pose does not move the glove shoulder and has no rotation.
  CHECK(f[Feature::kShoulderJointMovement] == doctest::Approx(0.0));
  CHECK(f[Feature::kMaxTrunkRotVelocity] == doctest::Approx(0.0));

  PoseFixtureSpec bent = s;
  bent.knee_angle_deg = 135;
  bent.trunk_tilt_deg = 120;
  bent.abduction_deg = 70;
  bent.lateral_tilt_deg = 12;
  const FeatureVector g = extract_features(make_pose_fixture(bent));
  CHECK(g[Feature::kKneeExtension] == doctest::Approx(135.0).epsilon(1e-9));
  CHECK(g[Feature::kForwardTrunkTilt] == doctest::Approx(120.0).epsilon(1e-9));
  CHECK(g[Feature::kShoulderAbduction] == doctest::Approx(70.0).epsilon(1e-9));
  CHECK(g[Feature::kLateralTrunkTilt] == doctest::Approx(12.0).epsilon(1e-9));
}

TEST_CASE("constant hip rotation gives its rate as F5") {
  PoseFixtureSpec s;
  s.hip_rotation_deg_s = 500;
  const FeatureVector f = extract_features(make_pose_fixture(s));
  CHECK(f[Feature::kMaxTrunkRotVelocity] == doctest::Approx(500.0).epsilon(1e-9));
}

TEST_CASE("lateral tilt is signed toward the glove side for both hands") {
  PoseFixtureSpec s;
  s.lateral_tilt_deg = 10;
  const double right = extract_features(make_pose_fixture(s))[Feature::kLateralTrunkTilt];
  s.throwing_side = Side::kLeft;
  const double left = extract_features(to_right_handed(make_pose_fixture(s)))[Feature::kLateralTrunkTilt];
  CHECK(right == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(left == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("release frame too early for the pre-release window") {
  MotionSequence s = make_pose_fixture({});
  s.release_frame = 9;
  CHECK_THROWS_AS(extract_features(s), ValidationError);
  s.release_frame = 10;
  CHECK_NOTHROW(extract_features(s));
}

TEST_CASE("extractor agrees with the synthetic ground truth") {
  for (const auto& t : make_cohort(10, 5, 99)) {
    const FeatureVector f = extract_features(t.sequence);
    const FeatureVector& g = t.ground_truth;
    CHECK(std::abs(f[Feature::kShoulderJointMovement] - g[Feature::kShoulderJointMovement]) <= 1.0);
    CHECK(std::abs(f[Feature::kShoulderAbduction] - g[Feature::kShoulderAbduction]) <= 0.5);
    CHECK(std::abs(f[Feature::kForwardTrunkTilt] - g[Feature::kForwardTrunkTilt]) <= 0.5);
    CHECK(std::abs(f[Feature::kLateralTrunkTilt] - g[Feature::kLateralTrunkTilt]) <= 0.5);
    CHECK(std::abs(f[Feature::kMaxTrunkRotVelocity] - g[Feature::kMaxTrunkRotVelocity]) <= 2.0);
    CHECK(std::abs(f[Feature::kHipShoulderDelay] - g[Feature::kHipShoulderDelay]) <= 12.0);
    CHECK(std::abs(f[Feature::kKneeExtension] - g[Feature::kKneeExtension]) <= 0.5);
    CHECK(std::abs(f[Feature::kStrideLength] - g[Feature::kStrideLength]) <= 1.0);
    CHECK_NOTHROW(f.validate());
  }
}

TEST_CASE("translation, vertical rotation and scaling") {
  const auto cohort = make_cohort(2, 2, 41);
  for (const auto& t : cohort) {
    const FeatureVector f = extract_features(t.sequence);
    const FeatureVector moved = extract_features(transformed(t.sequence, Eigen::Matrix3d::Identity(), {120, -40, 3000}));
    for (std::size_t k = 0; k < kFeatureCount; ++k) CHECK(moved[k] == doctest::Approx(f[k]).epsilon(1e-9));

    const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.7, Eigen::Vector3d::UnitY()).toRotationMatrix();
    const FeatureVector turned = extract_features(transformed(t.sequence, rot, Eigen::Vector3d::Zero()));
    for (Feature k : {Feature::kShoulderJointMovement, Feature::kForwardTrunkTilt, Feature::kKneeExtension,
                      Feature::kStrideLength}) {
      CHECK(turned[k] == doctest::Approx(f[k]).epsilon(1e-9));
    }

    const FeatureVector scaled = extract_features(transformed(t.sequence, Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero(), 1.3));
    CHECK(scaled[Feature::kShoulderJointMovement] == doctest::Approx(1.3 * f[Feature::kShoulderJointMovement]).epsilon(1e-9));
    CHECK(scaled[Feature::kStrideLength] == doctest::Approx(1.3 * f[Feature::kStrideLength]).epsilon(1e-9));
    for (Feature k : {Feature::kShoulderAbduction, Feature::kForwardTrunkTilt, Feature::kLateralTrunkTilt,
                      Feature::kKneeExtension, Feature::kMaxTrunkRotVelocity, Feature::kHipShoulderDelay}) {
      CHECK(scaled[k] == doctest::Approx(f[k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("normalized deltas") {
  FeatureVector a;
  a.values = {200, 90, 100, 10, 600, 40, 150, 1000};
  for (double d : delta(a, a)) CHECK(d == 0.0);

  FeatureVector b = a;
  b[Feature::kStrideLength] = 1200;
  b[Feature::kKneeExtension] = 168;
  b[Feature::kHipShoulderDelay] = 64;
  const auto d = delta(a, b);
  CHECK(d[7] == doctest::Approx(200.0 / (1000.0 + 1e-6)).epsilon(1e-15));
  CHECK(d[6] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(d[5] == doctest::Approx(24.0 / 120.0).epsilon(1e-12));

  FeatureVector zero;
  for (double s : DeltaNormalization{}.scales(zero)) CHECK(s > 0);
}

TEST_CASE("feature vector validation") {
  FeatureVector f;
  f.values = {200, 90, 100, 10, 600, 40, 150, 1000};
  CHECK_NOTHROW(f.validate());
  FeatureVector g = f;
  g[Feature::kKneeExtension] = 181;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g = f;
  g[Feature::kStrideLength] = -1;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  g = f;
  g[Feature::kShoulderAbduction] = std::nan("");
  CHECK_THROWS_AS(g.validate(), ValidationError);
}

TEST_CASE("feature files round trip exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "pmgf_features_test";
  std::filesystem::create_directories(dir);
  std::vector<FeatureRow> rows;
  for (const auto& t : make_cohort(2, 2, 12)) rows.push_back({t.sequence.trial_id, t.sequence.athlete_id, t.ground_truth});
  write_feature_csv(dir / "f.csv", rows);
  const auto back = read_feature_csv(dir / "f.csv");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].trial_id == rows[i].trial_id);
    CHECK(back[i].athlete_id == rows[i].athlete_id);
    CHECK(back[i].features == rows[i].features);
  }
  write_feature_json(dir / "f.json", rows[0].features);
  CHECK(read_feature_json(dir / "f.json") == rows[0].features);
  std::filesystem::remove_all(dir);
}
