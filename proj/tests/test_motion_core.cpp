#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pmgf/errors.hpp"
#include "pmgf/motion.hpp"
#include "pmgf/preprocess.hpp"
#include "pmgf/synth.hpp"

using namespace pmgf;

namespace {

RawCapture capture_from(std::size_t frames, double rate, auto&& position) {
  RawCapture raw;
  raw.positions = JointPositions(frames);
  raw.sample_rate_hz = rate;
  raw.athlete_id = "A";
  raw.trial_id = "A_T1";
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t j = 0; j < kJointCount; ++j)
      for (std::size_t a = 0; a < kAxes; ++a)
        raw.positions.at(f, static_cast<JointId>(j), a) = position(static_cast<double>(f) / rate, j, a);
  return raw;
}

double amplitude_after_filter(double freq, double cutoff, double rate) {
  const std::size_t n = 4000;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  const auto sos = butterworth_lowpass4(cutoff, rate);
  const auto y = filtfilt(sos, x);
  double peak = 0;
  for (std::size_t i = n / 4; i < 3 * n / 4; ++i) peak = std::max(peak, std::abs(y[i]));
  return peak;
}

}  // namespace

TEST_CASE("joint order and mirroring") {
  CHECK(kJointCount == 15);
  CHECK(name(JointId::kHead) == "head");
  CHECK(name(JointId::kToeR) == "toe_R");
  CHECK(mirror_joint(JointId::kWristL) == JointId::kWristR);
  CHECK(mirror_joint(JointId::kHead) == JointId::kHead);
  for (std::size_t j = 0; j < kJointCount; ++j) {
    const auto id = static_cast<JointId>(j);
    CHECK(mirror_joint(mirror_joint(id)) == id);
    CHECK(joint_from_name(name(id)) == id);
  }
  CHECK_FALSE(joint_from_name("tail").has_value());
}

TEST_CASE("raw capture validation") {
  RawCapture raw = capture_from(10, 240, [](double, std::size_t, std::size_t) { return 1.0; });
  CHECK_NOTHROW(raw.validate());
  raw.sample_rate_hz = 0;
  CHECK_THROWS_AS(raw.validate(), ValidationError);
  raw.sample_rate_hz = 240;
  raw.positions.at(3, JointId::kHead, 1) = std::nan("");
  CHECK_THROWS_AS(raw.validate(), ValidationError);
  RawCapture one = capture_from(1, 240, [](double, std::size_t, std::size_t) { return 1.0; });
  CHECK_THROWS_AS(one.validate(), ValidationError);
}

TEST_CASE("butterworth magnitude response") {
  const auto sos = butterworth_lowpass4(13.4, 240);
  CHECK(magnitude_response(sos, 0.0, 240) == doctest::Approx(1.0).epsilon(1e-12));
  // -3 dB at the cutoff for a single pass of a Butterworth design.
  CHECK(magnitude_response(sos, 13.4, 240) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-9));
  CHECK_THROWS_AS(butterworth_lowpass4(120, 240), ValidationError);
  CHECK_THROWS_AS(butterworth_lowpass4(-1, 240), ValidationError);
}

TEST_CASE("zero-phase filter passes DC and low frequencies and removes high ones") {
  const double rate = 500, cutoff = 10;
  const RawCapture raw = capture_from(300, rate, [](double, std::size_t j, std::size_t a) { return 100.0 * j + a; });
  const RawCapture out = lowpass_filter(raw, cutoff);
  for (std::size_t i = 0; i < raw.positions.values().size(); ++i)
    CHECK(out.positions.values()[i] == doctest::Approx(raw.positions.values()[i]).epsilon(1e-12));
  CHECK(out.athlete_id == raw.athlete_id);
  CHECK(out.sample_rate_hz == raw.sample_rate_hz);

  CHECK(amplitude_after_filter(0.1 * cutoff, cutoff, rate) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(amplitude_after_filter(10 * cutoff, cutoff, rate) < 0.01);

  // Zero phase: a slow sinusoid keeps its peak positions.
  const std::size_t n = 2000;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * 2.0 * static_cast<double>(i) / rate);
  const auto y = filtfilt(butterworth_lowpass4(cutoff, rate), x);
  for (std::size_t i = 200; i < n - 200; ++i) CHECK(std::abs(y[i] - x[i]) < 2e-3);
}

TEST_CASE("filter rejects short captures and cutoffs above Nyquist") {
  const RawCapture tiny = capture_from(kFiltfiltPad, 240, [](double t, std::size_t, std::size_t) { return t; });
  CHECK_THROWS_AS(lowpass_filter(tiny, 10.0), ValidationError);
  const RawCapture ok = capture_from(100, 240, [](double t, std::size_t, std::size_t) { return t; });
  CHECK_THROWS_AS(lowpass_filter(ok, 130.0), ValidationError);
}

TEST_CASE("residual analysis cutoff lies inside the search range") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0, 2.0);
  const RawCapture raw = capture_from(600, 240, [&](double t, std::size_t j, std::size_t a) {
    return 300 * std::sin(2 * std::numbers::pi * 2.5 * t + 0.3 * j + a) + noise(rng);
  });
  const AutoCutoff spec;
  const double fc = residual_analysis_cutoff(raw, spec);
  CHECK(fc >= spec.min_hz);
  CHECK(fc <= spec.max_hz);
  CHECK(resolve_cutoff(raw, AutoCutoff{false}) == kDefaultCutoffHz);
  CHECK(resolve_cutoff(raw, 8.0) == 8.0);
}

TEST_CASE("release detection uses the throwing wrist and the earliest maximum") {
  auto wrist_profile = [](std::vector<double> speeds, Side side) {
    RawCapture raw = capture_from(speeds.size() + 1, 100, [](double, std::size_t, std::size_t) { return 0.0; });
    raw.throwing_side = side;
    const JointId w = side == Side::kRight ? JointId::kWristR : JointId::kWristL;
    double x = 0;
    for (std::size_t i = 0; i < speeds.size(); ++i) {
      x += speeds[i];
      raw.positions.at(i + 1, w, 0) = x;
    }
    return raw;
  };
  CHECK(detect_release(wrist_profile({1, 5, 2}, Side::kRight)) == 1);
  CHECK(detect_release(wrist_profile({3, 3, 1}, Side::kRight)) == 0);
  CHECK(detect_release(wrist_profile({1, 2, 7}, Side::kLeft)) == 2);

  RawCapture shifted = wrist_profile({1, 5, 2}, Side::kRight);
  for (auto& v : shifted.positions.values()) v += 1234.5;
  CHECK(detect_release(shifted) == 1);

  const RawCapture still = capture_from(10, 100, [](double, std::size_t, std::size_t) { return 4.0; });
  CHECK_THROWS_AS(detect_release(still), ValidationError);
}

TEST_CASE("segmentation shape and exact linear resampling") {
  const double rate = 500;
  const RawCapture raw =
      capture_from(650, rate, [](double t, std::size_t j, std::size_t a) { return 10.0 * j + 3.0 * a + 250.0 * t; });
  const MotionSequence seq = segment_and_normalize(raw, 520);
  CHECK(seq.positions.frames() == 101);
  CHECK(seq.release_frame == 83);
  const double t0 = 520 / rate - 1.0;
  for (std::size_t f = 0; f < 101; ++f) {
    const double t = t0 + static_cast<double>(f) * kFrameDtS;
    for (std::size_t j = 0; j < kJointCount; ++j)
      for (std::size_t a = 0; a < kAxes; ++a)
        CHECK(std::abs(seq.positions.at(f, static_cast<JointId>(j), a) - (10.0 * j + 3.0 * a + 250.0 * t)) < 1e-9);
  }
  CHECK_THROWS_AS(segment_and_normalize(raw, 400), ValidationError);
  CHECK_THROWS_AS(segment_and_normalize(raw, 560), ValidationError);
  // 600 samples at 500 Hz cannot hold 0.2 s after sample 520.
  const RawCapture short_raw = capture_from(600, rate, [](double t, std::size_t, std::size_t) { return t; });
  CHECK_THROWS_AS(segment_and_normalize(short_raw, 520), ValidationError);
}

TEST_CASE("240 Hz and 500 Hz captures of one motion resample to the same sequence") {
  auto motion = [](double t, std::size_t j, std::size_t a) {
    return 200.0 * std::sin(2 * std::numbers::pi * 1.5 * t + 0.4 * static_cast<double>(j) + static_cast<double>(a)) +
           80.0 * t * t;
  };
  // Release at t = 1.5 s in both captures.
  const RawCapture a = capture_from(480, 240, motion);
  const RawCapture b = capture_from(1000, 500, motion);
  const MotionSequence sa = segment_and_normalize(a, 360);
  const MotionSequence sb = segment_and_normalize(b, 750);
  double worst = 0;
  for (std::size_t i = 0; i < sa.positions.values().size(); ++i)
    worst = std::max(worst, std::abs(sa.positions.values()[i] - sb.positions.values()[i]));
  CHECK(worst < 0.1);
}

TEST_CASE("release detected on synthetic raw captures within one frame") {
  const auto cohort = make_cohort(4, 3, 5);
  for (const auto& t : cohort) {
    std::size_t truth = 0;
    const RawCapture raw = render_raw_capture(t, 240, 1.5, 0.5, &truth);
    const RawCapture filtered = lowpass_filter(to_right_handed(raw), kDefaultCutoffHz);
    const auto found = static_cast<long>(detect_release(filtered));
    CHECK(std::abs(found - static_cast<long>(truth)) <= 1);
  }
}

TEST_CASE("full preprocessing yields 101 frames with release at 83") {
  const auto cohort = make_cohort(2, 2, 9);
  for (const auto& t : cohort) {
    const MotionSequence s = preprocess(render_raw_capture(t, 300, 1.5, 0.5), AutoCutoff{});
    CHECK(s.positions.frames() == 101);
    CHECK(s.release_frame == 83);
    CHECK(s.athlete_id == t.sequence.athlete_id);
    CHECK_NOTHROW(s.validate());
  }
}

TEST_CASE("scaler statistics and round trip") {
  MotionSequence c;
  for (auto& v : c.positions.values()) v = 42.0;
  const MotionSequence arr[] = {c};
  const Scaler s1 = fit_scaler(arr);
  CHECK(s1.mean[0] == 42.0);
  CHECK(s1.std[0] == kScalerStdFloor);

  MotionSequence zero, two;
  for (auto& v : two.positions.values()) v = 2.0;
  const MotionSequence pair[] = {zero, two};
  const Scaler s2 = fit_scaler(pair);
  CHECK(s2.mean[7] == 1.0);
  CHECK(s2.std[7] == 1.0);

  CHECK_THROWS_AS(fit_scaler(std::span<const MotionSequence>{}), ValidationError);

  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0, 300);
  std::vector<MotionSequence> corpus(7);
  for (auto& s : corpus)
    for (auto& v : s.positions.values()) v = n(rng) + 500;
  const Scaler s = fit_scaler(corpus);
  std::vector<double> sum(kCoordsPerFrame, 0), sq(kCoordsPerFrame, 0);
  double count = 0;
  for (const auto& q : corpus) {
    const MotionSequence z = standardize(q, s);
    const MotionSequence back = destandardize(z, s);
    for (std::size_t i = 0; i < q.positions.values().size(); ++i) {
      CHECK(std::abs(back.positions.values()[i] - q.positions.values()[i]) <= 1e-9 * std::abs(q.positions.values()[i]));
      sum[i % kCoordsPerFrame] += z.positions.values()[i];
      sq[i % kCoordsPerFrame] += z.positions.values()[i] * z.positions.values()[i];
    }
    count += static_cast<double>(q.positions.frames());
  }
  for (std::size_t k = 0; k < kCoordsPerFrame; ++k) {
    const double mean = sum[k] / count;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(sq[k] / count - mean * mean) - 1.0) < 1e-9);
  }

  MotionSequence at_mean, at_plus;
  for (std::size_t f = 0; f < kNormalizedFrames; ++f)
    for (std::size_t k = 0; k < kCoordsPerFrame; ++k) {
      at_mean.positions.values()[f * kCoordsPerFrame + k] = s.mean[k];
      at_plus.positions.values()[f * kCoordsPerFrame + k] = s.mean[k] + s.std[k];
    }
  for (double v : standardize(at_mean, s).positions.values()) CHECK(v == 0.0);
  for (double v : standardize(at_plus, s).positions.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("left-handed captures are mirrored onto right-handed ones") {
  CohortOptions opts;
  opts.marker_noise_mm = 0;
  const auto right = make_cohort(2, 1, 21, opts);
  MotionSequence left = right[0].sequence;
  for (std::size_t f = 0; f < kNormalizedFrames; ++f)
    for (std::size_t j = 0; j < kJointCount; ++j) {
      const auto id = static_cast<JointId>(j);
      Eigen::Vector3d p = right[0].sequence.point(f, mirror_joint(id));
      p.z() = -p.z();
      left.positions.set_point(f, id, p);
    }
  left.throwing_side = Side::kLeft;
  const MotionSequence back = to_right_handed(left);
  CHECK(back.throwing_side == Side::kRight);
  for (std::size_t i = 0; i < back.positions.values().size(); ++i)
    CHECK(back.positions.values()[i] == right[0].sequence.positions.values()[i]);
  CHECK(to_right_handed(right[0].sequence) == right[0].sequence);
}

TEST_CASE("metadata relabeling commutes with preprocessing") {
  const auto cohort = make_cohort(2, 1, 4);
  RawCapture raw = render_raw_capture(cohort[0], 240, 1.5, 0.5);
  const MotionSequence a = preprocess(raw, 12.0);
  raw.athlete_id = "renamed";
  raw.trial_id = "renamed_T9";
  MotionSequence b = preprocess(raw, 12.0);
  CHECK(b.athlete_id == "renamed");
  CHECK(a.positions == b.positions);
}
