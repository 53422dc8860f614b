#include "pmgf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "pmgf/errors.hpp"
#include "pmgf/motion_io.hpp"

namespace pmgf {

namespace {

using Eigen::Vector3d;
using Pose = std::array<Vector3d, kJointCount>;

constexpr double kPi = std::numbers::pi;
constexpr double kDegToRad = kPi / 180.0;
constexpr double kRadToDeg = 180.0 / kPi;

// The kinematics start moving at kMotionStart and the stride heel lands at
// kLandingTime.
constexpr double kMotionStart = -1.2;
constexpr double kLandingTime = -0.12;
constexpr double kPivotHipHeight = 0.90;  // fraction of leg length
constexpr double kPivotReach = 0.985;
constexpr double kFollowThroughDecel = 0.35;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double smoothstep(double a, double b, double t) {
  if (t <= a) return 0.0;
  if (t >= b) return 1.0;
  const double s = (t - a) / (b - a);
  return s * s * (3.0 - 2.0 * s);
}

// Integral of cos^2(pi u / 2) from -1 to s, normalised to 1 over the bump.
double bump_integral(double s) {
  if (s <= -1.0) return 0.0;
  if (s >= 1.0) return 1.0;
  return 0.5 * (s + 1.0) + std::sin(kPi * s) / (2.0 * kPi);
}

Vector3d heading_dir(double deg) { return {std::cos(deg * kDegToRad), 0.0, std::sin(deg * kDegToRad)}; }

Vector3d unit_or(const Vector3d& v, const Vector3d& fallback) {
  const double n = v.norm();
  return n > 1e-12 ? Vector3d(v / n) : fallback;
}

// Knee position for a two-segment leg; straight when out of reach.
Vector3d knee_ik(const Vector3d& hip, const Vector3d& heel, double thigh, double shank, const Vector3d& hint) {
  Vector3d u = hip - heel;
  const double d = u.norm();
  u /= d;
  if (d >= thigh + shank) return heel + shank * u;
  const double cg = std::clamp((shank * shank + d * d - thigh * thigh) / (2.0 * shank * d), -1.0, 1.0);
  const double sg = std::sqrt(1.0 - cg * cg);
  const Vector3d n = unit_or(hint - hint.dot(u) * u, Vector3d::UnitX());
  return heel + shank * (cg * u + sg * n);
}

// Cubic Hermite between (t0, p0, v0) and (t1, p1, v1).
Vector3d hermite(double t, double t0, const Vector3d& p0, const Vector3d& v0, double t1, const Vector3d& p1,
                 const Vector3d& v1) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * h * v0 + (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * h * v1;
}

double hermite_scalar(double t, double t0, double p0, double v0, double t1, double p1, double v1) {
  return hermite(t, t0, Vector3d::Constant(p0), Vector3d::Constant(v0), t1, Vector3d::Constant(p1),
                 Vector3d::Constant(v1))
      .x();
}

struct Derived {
  PitchParams p;
  double leg = 0;
  Vector3d pivot0, stride_heel, lift_heel;
  Vector3d c_start, c_rel, v_rel;
  Vector3d d_start, d_rel;
  double trunk_end_rate = 1.2;
  double shoulder_peak_time = 0;
};

double hip_heading(const PitchParams& p, double tau) {
  const double w = p.hip_halfwidth_s;
  return p.hip_start_heading_deg - p.hip_peak_speed_deg_s * w * bump_integral((tau - p.hip_peak_time_s) / w);
}

double shoulder_heading(const PitchParams& p, double tau) {
  const double w = p.shoulder_halfwidth_s;
  const double a = p.shoulder_speed_gain * p.hip_peak_speed_deg_s;
  const double peak = p.hip_peak_time_s + p.hip_shoulder_delay_s;
  return p.shoulder_start_heading_deg - a * w * bump_integral((tau - peak) / w);
}

Vector3d forward_of(const Vector3d& line_dir) { return unit_or(Vector3d::UnitY().cross(line_dir), Vector3d::UnitX()); }

double lateral_tilt_of(const Vector3d& head, const Vector3d& stride_heel) {
  const Vector3d v = head - stride_heel;
  return std::atan2(-v.z(), v.y()) * kRadToDeg;
}

Derived derive(const PitchParams& p) {
  const SegmentLengths& s = p.segments;
  require(s.thigh > 0 && s.shank > 0 && s.hip_width > 0 && s.shoulder_width > 0 && s.trunk > 0 && s.head > 0 &&
              s.upper_arm > 0 && s.forearm > 0 && s.foot > 0,
          "segment lengths must be positive");
  require(p.knee_angle_deg > 0 && p.knee_angle_deg <= 180, "knee angle outside (0, 180]");
  require(p.trunk_tilt_deg > 0 && p.trunk_tilt_deg < 180, "trunk tilt outside (0, 180)");
  require(std::abs(p.stride_lateral_mm) < p.stride_length_mm, "stride lateral offset exceeds stride length");

  Derived d;
  d.p = p;
  const double L = s.thigh + s.shank;
  const double f7 = p.knee_angle_deg * kDegToRad;
  d.leg = std::sqrt(std::max(0.0, s.thigh * s.thigh + s.shank * s.shank - 2.0 * s.thigh * s.shank * std::cos(f7)));
  d.pivot0 = Vector3d::Zero();
  const double dz = p.stride_lateral_mm;
  d.stride_heel = Vector3d(std::sqrt(p.stride_length_mm * p.stride_length_mm - dz * dz), 0.0, dz);
  d.lift_heel = Vector3d(80.0, p.lift_height_mm, -160.0);

  const double beta = p.leg_lean_deg * kDegToRad;
  const Vector3d leg_dir(-std::sin(beta), std::cos(beta), 0.0);
  const Vector3d h0 = heading_dir(hip_heading(p, 0.0));
  d.c_rel = d.stride_heel + d.leg * leg_dir + 0.5 * s.hip_width * h0;
  d.c_start = d.pivot0 + Vector3d(0.0, kPivotHipHeight * L, 0.0) - 0.5 * s.hip_width * heading_dir(p.hip_start_heading_deg);
  d.v_rel = Vector3d(1500.0, -250.0, 0.0);

  // Trunk direction at release: forward lean fixed by the tilt target, the
  // lateral component found by bisection on the head-over-heel angle.
  const Vector3d fwd0 = forward_of(h0);
  const double a = -std::cos(p.trunk_tilt_deg * kDegToRad) / std::sin(p.trunk_tilt_deg * kDegToRad);
  const double reach = s.trunk + s.head;
  auto trunk_for = [&](double b) { return Vector3d(Vector3d::UnitY() + a * fwd0 + b * h0).normalized(); };
  auto tilt_for = [&](double b) { return lateral_tilt_of(d.c_rel + reach * trunk_for(b), d.stride_heel); };
  double lo = -3.0, hi = 3.0;
  double f_lo = tilt_for(lo) - p.lateral_tilt_deg, f_hi = tilt_for(hi) - p.lateral_tilt_deg;
  require(f_lo * f_hi <= 0.0, "lateral trunk tilt target not reachable for this posture");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = tilt_for(mid) - p.lateral_tilt_deg;
    if ((f_mid <= 0.0) == (f_lo <= 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  d.d_rel = trunk_for(0.5 * (lo + hi));
  d.d_start = Vector3d(-0.12, 1.0, 0.05).normalized();
  d.shoulder_peak_time = p.hip_peak_time_s + p.hip_shoulder_delay_s;
  return d;
}

Vector3d pelvis_center(const Derived& d, double tau) {
  if (tau <= kMotionStart) return d.c_start;
  if (tau <= 0.0) return hermite(tau, kMotionStart, d.c_start, Vector3d::Zero(), 0.0, d.c_rel, d.v_rel);
  const double t = std::min(tau, kFollowThroughDecel);
  Vector3d c = d.c_rel + d.v_rel * t - 0.5 * (d.v_rel / kFollowThroughDecel) * t * t;
  return c;
}

Vector3d trunk_dir(const Derived& d, double tau) {
  double s;
  if (tau <= kMotionStart) {
    s = 0.0;
  } else if (tau <= 0.0) {
    s = hermite_scalar(tau, kMotionStart, 0.0, 0.0, 0.0, 1.0, d.trunk_end_rate);
  } else {
    s = 1.0 + d.trunk_end_rate * tau;
  }
  return (d.d_start + s * (d.d_rel - d.d_start)).normalized();
}

Vector3d stride_heel_at(const Derived& d, double tau) {
  if (tau >= kLandingTime) return d.stride_heel;
  const double sx = smoothstep(-0.85, kLandingTime, tau);
  const double sy = smoothstep(-0.75, kLandingTime, tau);
  const double sz = smoothstep(-0.9, kLandingTime, tau);
  return {d.lift_heel.x() + sx * (d.stride_heel.x() - d.lift_heel.x()), d.lift_heel.y() * (1.0 - sy),
          d.lift_heel.z() + sz * (d.stride_heel.z() - d.lift_heel.z())};
}

double abduction_at(const PitchParams& p, double tau) {
  constexpr double kStart = 30.0, kEnd = 70.0;
  if (tau < -0.14) return kStart + smoothstep(-0.9, -0.14, tau) * (p.abduction_deg - kStart);
  if (tau <= 0.02) return p.abduction_deg;
  return p.abduction_deg + smoothstep(0.02, 0.2, tau) * (kEnd - p.abduction_deg);
}

double whip_angle(const PitchParams& p, double tau) {
  constexpr double kStart = 15.0, kSweep = 190.0;
  const double cdf = 0.5 * std::erfc(-tau / (p.whip_sigma_s * std::numbers::sqrt2));
  return (kStart + kSweep * cdf) * kDegToRad;
}

// Canonical right-handed pose without marker offsets.
Pose clean_pose(const Derived& d, double tau) {
  const PitchParams& p = d.p;
  const SegmentLengths& s = p.segments;
  const Vector3d up = Vector3d::UnitY();
  Pose P;

  const Vector3d h = heading_dir(hip_heading(p, tau));
  const Vector3d c = pelvis_center(d, tau);
  const Vector3d hip_l = c - 0.5 * s.hip_width * h;
  const Vector3d hip_r = c + 0.5 * s.hip_width * h;
  const Vector3d pelvis_fwd = forward_of(h);
  P[index(JointId::kHipL)] = hip_l;
  P[index(JointId::kHipR)] = hip_r;

  const Vector3d heel_l = stride_heel_at(d, tau);
  P[index(JointId::kHeelL)] = heel_l;
  P[index(JointId::kKneeL)] = knee_ik(hip_l, heel_l, s.thigh, s.shank, pelvis_fwd);
  const double lifted = 1.0 - smoothstep(-0.4, kLandingTime, tau);
  P[index(JointId::kToeL)] =
      heel_l + s.foot * Vector3d(0.95 * (1.0 - 0.4 * lifted), -0.6 * lifted, -0.3).normalized() + Vector3d(0, 40, 0);

  const double reach = kPivotReach * (s.thigh + s.shank);
  Vector3d heel_r = d.pivot0;
  if ((hip_r - d.pivot0).norm() > reach) heel_r = hip_r - reach * (hip_r - d.pivot0).normalized();
  P[index(JointId::kHeelR)] = heel_r;
  P[index(JointId::kKneeR)] = knee_ik(hip_r, heel_r, s.thigh, s.shank, pelvis_fwd);
  P[index(JointId::kToeR)] = heel_r + s.foot * Vector3d(0.2, 0.0, 0.98).normalized() + Vector3d(0, 40, 0);

  const Vector3d dir = trunk_dir(d, tau);
  const Vector3d mid_shoulder = c + s.trunk * dir;
  P[index(JointId::kHead)] = mid_shoulder + s.head * dir;
  const Vector3d sl = heading_dir(shoulder_heading(p, tau));
  const Vector3d chest = forward_of(sl);
  const Vector3d sh_l = mid_shoulder - 0.5 * s.shoulder_width * sl;
  const Vector3d sh_r = mid_shoulder + 0.5 * s.shoulder_width * sl;
  P[index(JointId::kShoulderL)] = sh_l;
  P[index(JointId::kShoulderR)] = sh_r;

  // Throwing arm: the upper arm sits at the abduction angle from the
  // shoulder-to-hip line, in the plane that contains the shoulder line.
  const Vector3d down = (hip_r - sh_r).normalized();
  const Vector3d out = unit_or(sl - sl.dot(down) * down, chest);
  const double phi = abduction_at(p, tau) * kDegToRad;
  const Vector3d elbow_r = sh_r + s.upper_arm * (std::cos(phi) * down + std::sin(phi) * out);
  P[index(JointId::kElbowR)] = elbow_r;
  const Vector3d ua = (elbow_r - sh_r).normalized();
  const Vector3d q1 = unit_or(chest - chest.dot(ua) * ua, up);
  const Vector3d q3 = unit_or(up - up.dot(ua) * ua - up.dot(q1) * q1, ua.cross(q1));
  const double psi = whip_angle(p, tau);
  P[index(JointId::kWristR)] = elbow_r + s.forearm * (-std::cos(psi) * q1 + std::sin(psi) * q3);

  // Glove arm goes from pointing at the target to tucked by the side.
  const double g = smoothstep(-0.3, 0.0, tau);
  const Vector3d upper_a = (-sl - 0.2 * up + 0.2 * chest).normalized();
  const Vector3d upper_b = (-0.6 * sl - 0.7 * up + 0.3 * chest).normalized();
  const Vector3d fore_a = (-sl + 0.3 * up).normalized();
  const Vector3d fore_b = (0.6 * chest + 0.5 * up - 0.3 * sl).normalized();
  const Vector3d elbow_l = sh_l + s.upper_arm * unit_or((1 - g) * upper_a + g * upper_b, -up);
  P[index(JointId::kElbowL)] = elbow_l;
  P[index(JointId::kWristL)] = elbow_l + s.forearm * unit_or((1 - g) * fore_a + g * fore_b, chest);
  return P;
}

Pose noisy_pose(const Derived& d, double tau) {
  Pose P = clean_pose(d, tau);
  for (std::size_t j = 0; j < kJointCount; ++j) P[j] += d.p.marker_offset[j];
  return P;
}

double frame_time(std::size_t frame) {
  return (static_cast<double>(frame) - static_cast<double>(kReleaseFrame)) * kFrameDtS;
}

void store(JointPositions& out, std::size_t frame, const Pose& P, Side side) {
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const auto id = static_cast<JointId>(j);
    if (side == Side::kRight) {
      out.set_point(frame, id, P[j]);
    } else {
      out.set_point(frame, mirror_joint(id), Vector3d(P[j].x(), P[j].y(), -P[j].z()));
    }
  }
}

// Interior angle at b of the triangle a-b-c from side lengths.
double law_of_cosines_deg(const Vector3d& a, const Vector3d& b, const Vector3d& c) {
  const double ab = (a - b).norm(), cb = (c - b).norm(), ac = (a - c).norm();
  const double cosv = std::clamp((ab * ab + cb * cb - ac * ac) / (2.0 * ab * cb), -1.0, 1.0);
  return std::acos(cosv) * kRadToDeg;
}

// Per-interval heading increments of a closed-form heading on the frame grid.
std::vector<double> grid_increments(const PitchParams& p, double (*heading)(const PitchParams&, double)) {
  std::vector<double> inc(kNormalizedFrames - 1);
  for (std::size_t f = 0; f + 1 < kNormalizedFrames; ++f) {
    inc[f] = std::abs(heading(p, frame_time(f + 1)) - heading(p, frame_time(f)));
  }
  return inc;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double jitter(std::mt19937_64& rng, double v, double sd, double lo, double hi) {
  return std::clamp(v + std::normal_distribution<double>(0.0, sd)(rng), lo, hi);
}

}  // namespace

double VelocityModel::predict(const FeatureVector& f) const {
  return intercept_mph + stride_coef * (f[Feature::kStrideLength] - stride_center) / stride_scale +
         knee_coef * (f[Feature::kKneeExtension] - knee_center) / knee_scale +
         trunk_coef * (f[Feature::kForwardTrunkTilt] - trunk_center) / trunk_scale +
         rotation_coef * (f[Feature::kMaxTrunkRotVelocity] - rotation_center) / rotation_scale;
}

std::array<Eigen::Vector3d, kJointCount> pitch_pose(const PitchParams& p, double tau) {
  return noisy_pose(derive(p), tau);
}

MotionSequence render_sequence(const PitchParams& p) {
  const Derived d = derive(p);
  MotionSequence seq;
  seq.release_frame = kReleaseFrame;
  seq.throwing_side = p.throwing_side;
  for (std::size_t f = 0; f < kNormalizedFrames; ++f) store(seq.positions, f, noisy_pose(d, frame_time(f)), p.throwing_side);
  return seq;
}

FeatureVector analytic_features(const PitchParams& p) {
  const Derived d = derive(p);
  auto at = [&](std::size_t f) { return noisy_pose(d, frame_time(f)); };
  auto J = [](const Pose& P, JointId j) { return P[index(j)]; };
  const std::size_t r = kReleaseFrame;
  const Pose R = at(r);
  FeatureVector out;

  double path = 0.0, abduction = 0.0;
  for (std::size_t f = r - kPreReleaseWindow; f < r; ++f) {
    const Pose A = at(f), B = at(f + 1);
    path += (J(B, JointId::kShoulderL) - J(A, JointId::kShoulderL)).norm();
    abduction += law_of_cosines_deg(J(A, JointId::kHipR), J(A, JointId::kShoulderR), J(A, JointId::kElbowR));
  }
  out[Feature::kShoulderJointMovement] = path;
  out[Feature::kShoulderAbduction] = abduction / static_cast<double>(kPreReleaseWindow);

  // Sagittal trunk angle: the trunk vector projected onto the vertical plane
  // through the pelvis-forward axis, measured from the backward horizontal.
  {
    const Vector3d trunk = 0.5 * (J(R, JointId::kShoulderL) + J(R, JointId::kShoulderR)) -
                           0.5 * (J(R, JointId::kHipL) + J(R, JointId::kHipR));
    const Vector3d fwd = forward_of(heading_dir(hip_heading(p, frame_time(r))));
    const double along = trunk.dot(fwd);
    const double sagittal = std::hypot(along, trunk.y());
    out[Feature::kForwardTrunkTilt] = std::acos(std::clamp(-along / sagittal, -1.0, 1.0)) * kRadToDeg;
  }
  {
    const Vector3d v = J(R, JointId::kHead) - J(R, JointId::kHeelL);
    const double frontal = std::hypot(v.y(), v.z());
    const double mag = std::acos(std::clamp(v.y() / frontal, -1.0, 1.0)) * kRadToDeg;
    out[Feature::kLateralTrunkTilt] = v.z() > 0 ? -mag : mag;
  }

  const std::vector<double> hip_inc = grid_increments(p, hip_heading);
  const std::vector<double> sh_inc = grid_increments(p, shoulder_heading);
  const auto hip_peak = std::max_element(hip_inc.begin(), hip_inc.end());
  const auto sh_peak = std::max_element(sh_inc.begin(), sh_inc.end());
  out[Feature::kMaxTrunkRotVelocity] = *hip_peak / kFrameDtS;
  out[Feature::kHipShoulderDelay] =
      static_cast<double>((sh_peak - sh_inc.begin()) - (hip_peak - hip_inc.begin())) * kFrameDtS * 1000.0;

  out[Feature::kKneeExtension] = law_of_cosines_deg(J(R, JointId::kHipL), J(R, JointId::kKneeL), J(R, JointId::kHeelL));
  out[Feature::kStrideLength] = (J(at(0), JointId::kHeelR) - J(R, JointId::kHeelL)).norm();
  return out;
}

AthleteStyle make_athlete_style(std::uint64_t style_seed, std::string athlete_id, const CohortOptions& options) {
  std::mt19937_64 rng(splitmix64(style_seed));
  AthleteStyle st;
  st.style_seed = style_seed;
  st.athlete_id = std::move(athlete_id);
  PitchParams& p = st.base;
  SegmentLengths& s = p.segments;
  s.thigh = uniform(rng, 420, 480);
  s.shank = uniform(rng, 400, 450);
  s.hip_width = uniform(rng, 280, 330);
  s.shoulder_width = uniform(rng, 340, 400);
  s.trunk = uniform(rng, 470, 530);
  s.head = uniform(rng, 230, 270);
  s.upper_arm = uniform(rng, 280, 320);
  s.forearm = uniform(rng, 250, 290);
  s.foot = uniform(rng, 230, 270);
  p.abduction_deg = uniform(rng, 88, 105);
  p.trunk_tilt_deg = uniform(rng, 100, 118);
  p.lateral_tilt_deg = uniform(rng, 6, 18);
  p.hip_peak_speed_deg_s = uniform(rng, 520, 760);
  p.hip_shoulder_delay_s = uniform(rng, 0.024, 0.056);
  p.knee_angle_deg = uniform(rng, 145, 170);
  p.stride_length_mm = uniform(rng, 1300, 1650);
  p.leg_lean_deg = uniform(rng, 10, 20);
  p.stride_lateral_mm = uniform(rng, -120, 60);
  p.hip_peak_time_s = uniform(rng, -0.19, -0.16);
  p.hip_start_heading_deg = uniform(rng, 170, 185);
  p.shoulder_start_heading_deg = uniform(rng, 178, 192);
  p.shoulder_speed_gain = uniform(rng, 1.6, 1.8);
  p.lift_height_mm = uniform(rng, 280, 380);
  p.whip_sigma_s = uniform(rng, 0.018, 0.024);
  p.throwing_side = uniform(rng, 0, 1) < options.left_handed_fraction ? Side::kLeft : Side::kRight;
  st.mean_ball_velocity_mph = options.velocity.predict(analytic_features(p));
  return st;
}

std::vector<SynthTrial> make_cohort(int n_athletes, int trials_per_athlete, std::uint64_t master_seed,
                                    const CohortOptions& options) {
  require(n_athletes >= 2, "make_cohort needs at least 2 athletes");
  require(trials_per_athlete >= 1, "make_cohort needs at least 1 trial per athlete");
  require(options.marker_noise_mm >= 0.0, "marker noise must be non-negative");
  std::vector<SynthTrial> out;
  out.reserve(static_cast<std::size_t>(n_athletes) * static_cast<std::size_t>(trials_per_athlete));
  for (int a = 0; a < n_athletes; ++a) {
    char id[16];
    std::snprintf(id, sizeof id, "A%02d", a + 1);
    const std::uint64_t style_seed = splitmix64(master_seed ^ (0x51ed2701ULL * static_cast<std::uint64_t>(a + 1)));
    const AthleteStyle style = make_athlete_style(style_seed, id, options);
    std::mt19937_64 rng(splitmix64(style_seed + 1));
    for (int t = 0; t < trials_per_athlete; ++t) {
      PitchParams p = style.base;
      p.abduction_deg = jitter(rng, p.abduction_deg, 1.2, 85, 108);
      p.trunk_tilt_deg = jitter(rng, p.trunk_tilt_deg, 1.0, 97, 121);
      p.lateral_tilt_deg = jitter(rng, p.lateral_tilt_deg, 0.8, 3, 21);
      p.hip_peak_speed_deg_s = jitter(rng, p.hip_peak_speed_deg_s, 12, 480, 800);
      p.hip_shoulder_delay_s = jitter(rng, p.hip_shoulder_delay_s, 0.003, 0.018, 0.062);
      p.knee_angle_deg = jitter(rng, p.knee_angle_deg, 1.2, 140, 175);
      p.stride_length_mm = jitter(rng, p.stride_length_mm, 12, 1250, 1700);
      p.hip_peak_time_s = jitter(rng, p.hip_peak_time_s, 0.004, -0.2, -0.15);
      std::normal_distribution<double> noise(0.0, options.marker_noise_mm);
      auto draw = [&] { return Vector3d(noise(rng), noise(rng), noise(rng)); };
      for (auto& o : p.marker_offset) o = draw();
      const Vector3d hips = draw(), shoulders = draw();
      p.marker_offset[index(JointId::kHipL)] = p.marker_offset[index(JointId::kHipR)] = hips;
      p.marker_offset[index(JointId::kShoulderL)] = p.marker_offset[index(JointId::kShoulderR)] = shoulders;

      SynthTrial trial;
      trial.params = p;
      trial.sequence = render_sequence(p);
      trial.ground_truth = analytic_features(p);
      trial.ball_velocity_mph = options.velocity.predict(trial.ground_truth) +
                                std::normal_distribution<double>(0.0, options.velocity.noise_sd_mph)(rng);
      trial.sequence.athlete_id = id;
      trial.sequence.trial_id = std::string(id) + "_T" + std::to_string(t + 1);
      trial.sequence.ball_velocity_mph = trial.ball_velocity_mph;
      out.push_back(std::move(trial));
    }
  }
  return out;
}

RawCapture render_raw_capture(const SynthTrial& trial, double sample_rate_hz, double lead_s, double tail_s,
                              std::size_t* release_index) {
  require(sample_rate_hz > 0 && lead_s >= 0 && tail_s >= 0, "invalid raw capture timing");
  const Derived d = derive(trial.params);
  const auto before = static_cast<std::size_t>(std::ceil(lead_s * sample_rate_hz - 1e-9));
  const auto after = static_cast<std::size_t>(std::ceil(tail_s * sample_rate_hz - 1e-9));
  RawCapture raw;
  raw.sample_rate_hz = sample_rate_hz;
  raw.athlete_id = trial.sequence.athlete_id;
  raw.trial_id = trial.sequence.trial_id;
  raw.throwing_side = trial.params.throwing_side;
  raw.ball_velocity_mph = trial.ball_velocity_mph;
  raw.positions = JointPositions(before + after + 1);
  for (std::size_t k = 0; k < before + after + 1; ++k) {
    const double tau = (static_cast<double>(k) - static_cast<double>(before)) / sample_rate_hz;
    store(raw.positions, k, noisy_pose(d, tau), trial.params.throwing_side);
  }
  if (release_index) *release_index = before;
  return raw;
}

MotionSequence make_pose_fixture(const PoseFixtureSpec& spec) {
  const SegmentLengths& s = spec.segments;
  require(spec.knee_angle_deg > 0 && spec.knee_angle_deg <= 180, "fixture knee angle outside (0, 180]");
  require(spec.trunk_tilt_deg > 0 && spec.trunk_tilt_deg < 180, "fixture trunk tilt outside (0, 180)");
  require(spec.abduction_deg >= 0 && spec.abduction_deg <= 180, "fixture abduction outside [0, 180]");
  require(std::abs(spec.lateral_tilt_deg) < 80, "fixture lateral tilt outside (-80, 80)");

  // Built in right-handed coordinates; mirrored for a left-handed fixture.
  auto canon = [&](Vector3d v) {
    if (spec.throwing_side == Side::kLeft) v.z() = -v.z();
    return v;
  };
  const Vector3d up = Vector3d::UnitY();
  const Vector3d heel_l = canon(spec.stride_heel_release);
  const Vector3d heel_r = canon(spec.pivot_heel_start);
  const double f7 = spec.knee_angle_deg * kDegToRad;
  const double leg = std::sqrt(std::max(0.0, s.thigh * s.thigh + s.shank * s.shank - 2 * s.thigh * s.shank * std::cos(f7)));
  const Vector3d h = heading_dir(spec.pelvis_heading_deg);
  const Vector3d fwd = forward_of(h);
  const Vector3d hip_l = heel_l + leg * up;
  const Vector3d hip_r = hip_l + s.hip_width * h;
  const Vector3d c = 0.5 * (hip_l + hip_r);

  const double a = -std::cos(spec.trunk_tilt_deg * kDegToRad) / std::sin(spec.trunk_tilt_deg * kDegToRad);
  auto trunk_for = [&](double b) { return Vector3d(up + a * fwd + b * h).normalized(); };
  auto tilt_for = [&](double b) { return lateral_tilt_of(c + (s.trunk + s.head) * trunk_for(b), heel_l); };
  double lo = -5, hi = 5;
  double f_lo = tilt_for(lo) - spec.lateral_tilt_deg;
  require(f_lo * (tilt_for(hi) - spec.lateral_tilt_deg) <= 0, "fixture lateral tilt not reachable");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = tilt_for(mid) - spec.lateral_tilt_deg;
    if ((f_mid <= 0) == (f_lo <= 0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  const Vector3d dir = trunk_for(0.5 * (lo + hi));

  Pose P;
  P[index(JointId::kHipL)] = hip_l;
  P[index(JointId::kHipR)] = hip_r;
  P[index(JointId::kHeelL)] = heel_l;
  P[index(JointId::kHeelR)] = heel_r;
  P[index(JointId::kKneeL)] = knee_ik(hip_l, heel_l, s.thigh, s.shank, fwd);
  const double reach = s.thigh + s.shank;
  const Vector3d pivot_heel =
      (hip_r - heel_r).norm() > reach ? Vector3d(hip_r - reach * (hip_r - heel_r).normalized()) : heel_r;
  P[index(JointId::kKneeR)] = knee_ik(hip_r, pivot_heel, s.thigh, s.shank, fwd);
  P[index(JointId::kToeL)] = heel_l + s.foot * fwd;
  P[index(JointId::kToeR)] = heel_r + s.foot * fwd;
  const Vector3d mid_sh = c + s.trunk * dir;
  P[index(JointId::kHead)] = mid_sh + s.head * dir;
  const Vector3d sh_l = mid_sh - 0.5 * s.shoulder_width * h;
  const Vector3d sh_r = mid_sh + 0.5 * s.shoulder_width * h;
  P[index(JointId::kShoulderL)] = sh_l;
  P[index(JointId::kShoulderR)] = sh_r;
  const Vector3d down = (hip_r - sh_r).normalized();
  const Vector3d out = unit_or(h - h.dot(down) * down, fwd);
  const double phi = spec.abduction_deg * kDegToRad;
  P[index(JointId::kElbowR)] = sh_r + s.upper_arm * (std::cos(phi) * down + std::sin(phi) * out);
  P[index(JointId::kWristR)] = P[index(JointId::kElbowR)] + s.forearm * up;
  P[index(JointId::kElbowL)] = sh_l + s.upper_arm * (-up);
  P[index(JointId::kWristL)] = P[index(JointId::kElbowL)] + s.forearm * fwd;

  MotionSequence seq;
  seq.release_frame = kReleaseFrame;
  seq.throwing_side = spec.throwing_side;
  seq.athlete_id = "fixture";
  seq.trial_id = "fixture";
  const auto is_foot = [](std::size_t j) {
    const auto id = static_cast<JointId>(j);
    return id == JointId::kHeelL || id == JointId::kHeelR || id == JointId::kToeL || id == JointId::kToeR;
  };
  for (std::size_t f = 0; f < kNormalizedFrames; ++f) {
    // Rigid turn about the vertical through the pelvis centre; feet stay put.
    const double turn = spec.hip_rotation_deg_s * frame_time(f) * kDegToRad;
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(turn, up).toRotationMatrix();
    Pose Q = P;
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (!is_foot(j) && turn != 0.0) Q[j] = c + rot * (P[j] - c);
    }
    // Inputs were mirrored above for a left-handed fixture; storing mirrors
    // back and swaps the labels.
    store(seq.positions, f, Q, spec.throwing_side);
  }
  return seq;
}

void write_cohort(const std::filesystem::path& dir, const std::vector<SynthTrial>& trials) {
  std::filesystem::create_directories(dir);
  Manifest m;
  m.kind = "normalized";
  for (const auto& t : trials) {
    const std::string& aid = t.sequence.athlete_id;
    if (m.athletes.empty() || m.athletes.back().athlete_id != aid) m.athletes.push_back({aid, {}});
    const std::string motion = t.sequence.trial_id + ".motion";
    const std::string truth = t.sequence.trial_id + ".truth.json";
    write_sequence(dir / motion, t.sequence);
    write_feature_json(dir / truth, t.ground_truth);
    m.athletes.back().trials.push_back({t.sequence.trial_id, motion, std::filesystem::path(truth)});
  }
  write_manifest(dir / "manifest.json", m);
}

}  // namespace pmgf
