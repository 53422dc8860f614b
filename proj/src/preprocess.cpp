#include "pmgf/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>

#include "pmgf/errors.hpp"

namespace pmgf {

std::array<Biquad, 2> butterworth_lowpass4(double cutoff_hz, double sample_rate_hz) {
  require(sample_rate_hz > 0.0, "sample rate must be positive");
  require(cutoff_hz > 0.0, "cutoff must be positive");
  require(cutoff_hz < 0.5 * sample_rate_hz, "cutoff " + std::to_string(cutoff_hz) +
                                                " Hz is at or above the Nyquist frequency " +
                                                std::to_string(0.5 * sample_rate_hz) + " Hz");
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate_hz);
  const double k2 = k * k;
  std::array<Biquad, 2> out{};
  for (int s = 0; s < 2; ++s) {
    // Analog section 1 / (s^2 + b s + 1); b = 2 sin((2m - 1) pi / 8).
    const double b = 2.0 * std::sin((2.0 * (s + 1) - 1.0) * std::numbers::pi / 8.0);
    const double a0 = 1.0 + b * k + k2;
    out[s] = Biquad{k2 / a0, 2.0 * k2 / a0, k2 / a0, (2.0 * k2 - 2.0) / a0, (1.0 - b * k + k2) / a0};
  }
  return out;
}

double magnitude_response(std::span<const Biquad> sections, double freq_hz, double sample_rate_hz) {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / sample_rate_hz);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& q : sections) h *= (q.b0 + q.b1 * z1 + q.b2 * z2) / (1.0 + q.a1 * z1 + q.a2 * z2);
  return std::abs(h);
}

namespace {

// Runs the cascade in place starting from the steady state for input level x[0].
void run_cascade(std::span<const Biquad> sections, std::vector<double>& x) {
  double level = x.front();
  for (const auto& q : sections) {
    const double gain = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    double z2 = (q.b2 - q.a2 * gain) * level;
    double z1 = (q.b1 - q.a1 * gain) * level + z2;
    for (double& v : x) {
      const double in = v;
      const double y = q.b0 * in + z1;
      z1 = q.b1 * in - q.a1 * y + z2;
      z2 = q.b2 * in - q.a2 * y;
      v = y;
    }
    level *= gain;
  }
}

}  // namespace

std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t pad = kFiltfiltPad;
  if (n <= pad) {
    throw ValidationError("series of " + std::to_string(n) + " samples is too short for filter warm-up (needs > " +
                          std::to_string(pad) + ")");
  }
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());
  run_cascade(sections, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

namespace {

RawCapture apply_filter(const RawCapture& raw, double cutoff_hz) {
  const auto sections = butterworth_lowpass4(cutoff_hz, raw.sample_rate_hz);
  RawCapture out = raw;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    for (std::size_t a = 0; a < kAxes; ++a) {
      const auto joint = static_cast<JointId>(j);
      const auto s = raw.positions.series(joint, a);
      out.positions.set_series(joint, a, filtfilt(sections, s));
    }
  }
  return out;
}

}  // namespace

double residual_analysis_cutoff(const RawCapture& raw, const AutoCutoff& spec) {
  raw.validate();
  const double upper = std::min(spec.max_hz, 0.45 * raw.sample_rate_hz);
  require(spec.step_hz > 0.0 && spec.min_hz > 0.0 && upper > spec.min_hz, "invalid residual analysis range");

  std::vector<double> freqs;
  std::vector<double> residuals;
  const auto values = raw.positions.values();
  for (double fc = spec.min_hz; fc <= upper + 1e-12; fc += spec.step_hz) {
    const RawCapture filtered = apply_filter(raw, fc);
    const auto fv = filtered.positions.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) sum += (values[i] - fv[i]) * (values[i] - fv[i]);
    freqs.push_back(fc);
    residuals.push_back(std::sqrt(sum / static_cast<double>(values.size())));
  }
  require(freqs.size() >= 4, "residual analysis needs at least 4 candidate cutoffs");

  // Least-squares line through the upper half of the curve.
  const std::size_t first = freqs.size() / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(freqs.size() - first);
  for (std::size_t i = first; i < freqs.size(); ++i) {
    sx += freqs[i];
    sy += residuals[i];
    sxx += freqs[i] * freqs[i];
    sxy += freqs[i] * residuals[i];
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / m;

  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (residuals[i] <= intercept) return freqs[i];
  }
  return kDefaultCutoffHz < upper ? kDefaultCutoffHz : upper;
}

double resolve_cutoff(const RawCapture& raw, const Cutoff& cutoff) {
  if (const double* hz = std::get_if<double>(&cutoff)) return *hz;
  const auto& spec = std::get<AutoCutoff>(cutoff);
  if (!spec.residual_analysis) return kDefaultCutoffHz;
  return residual_analysis_cutoff(raw, spec);
}

RawCapture lowpass_filter(const RawCapture& raw, const Cutoff& cutoff) {
  raw.validate();
  const double hz = resolve_cutoff(raw, cutoff);
  return apply_filter(raw, hz);
}

std::size_t detect_release(const RawCapture& raw) {
  raw.validate();
  require(raw.frames() >= 3, "release detection needs at least 3 frames");
  const JointId wrist = side_joints(raw.throwing_side).throwing_wrist;
  std::size_t best = 0;
  double best_speed = -1.0;
  for (std::size_t f = 0; f + 1 < raw.frames(); ++f) {
    const double speed = (raw.positions.point(f + 1, wrist) - raw.positions.point(f, wrist)).norm();
    if (speed > best_speed) {
      best_speed = speed;
      best = f;
    }
  }
  if (!(best_speed > 0.0)) throw ValidationError("throwing wrist never moves; no release detectable");
  return best;
}

MotionSequence segment_and_normalize(const RawCapture& raw, std::size_t release) {
  raw.validate();
  require(release < raw.frames(), "release index outside the capture");
  const double fs = raw.sample_rate_hz;
  const double start = static_cast<double>(release) - kWindowBeforeReleaseS * fs;
  const double end = static_cast<double>(release) + kWindowAfterReleaseS * fs;
  const double last = static_cast<double>(raw.frames() - 1);
  constexpr double kSlack = 1e-9;
  if (start < -kSlack || end > last + kSlack) {
    std::ostringstream msg;
    msg << "segment window [" << start << ", " << end << "] (samples) exceeds capture [0, " << last
        << "]; needs " << std::max(0.0, std::ceil(-start - kSlack)) << " samples of padding before and "
        << std::max(0.0, std::ceil(end - last - kSlack)) << " after";
    throw ValidationError(msg.str());
  }

  MotionSequence seq;
  seq.athlete_id = raw.athlete_id;
  seq.trial_id = raw.trial_id;
  seq.throwing_side = raw.throwing_side;
  seq.ball_velocity_mph = raw.ball_velocity_mph;
  seq.release_frame = kReleaseFrame;

  const double step = (end - start) / static_cast<double>(kNormalizedFrames - 1);
  const auto src = raw.positions.values();
  auto dst = seq.positions.values();
  for (std::size_t i = 0; i < kNormalizedFrames; ++i) {
    const double pos = std::clamp(start + step * static_cast<double>(i), 0.0, last);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, raw.frames() - 1);
    const double w = pos - static_cast<double>(lo);
    for (std::size_t c = 0; c < kCoordsPerFrame; ++c) {
      const double a = src[lo * kCoordsPerFrame + c];
      const double b = src[hi * kCoordsPerFrame + c];
      dst[i * kCoordsPerFrame + c] = a + w * (b - a);
    }
  }
  return seq;
}

MotionSequence preprocess(const RawCapture& raw, const Cutoff& cutoff) {
  const RawCapture canonical = to_right_handed(raw);
  const RawCapture filtered = lowpass_filter(canonical, cutoff);
  return segment_and_normalize(filtered, detect_release(filtered));
}

Scaler fit_scaler(std::span<const MotionSequence> sequences) {
  require(!sequences.empty(), "cannot fit a scaler to an empty corpus");
  std::vector<double> sum(kCoordsPerFrame, 0.0);
  std::size_t count = 0;
  for (const auto& seq : sequences) {
    const auto v = seq.positions.values();
    for (std::size_t f = 0; f < seq.positions.frames(); ++f) {
      for (std::size_t c = 0; c < kCoordsPerFrame; ++c) sum[c] += v[f * kCoordsPerFrame + c];
    }
    count += seq.positions.frames();
  }
  require(count > 0, "corpus has no frames");
  Scaler s;
  for (std::size_t c = 0; c < kCoordsPerFrame; ++c) s.mean[c] = sum[c] / static_cast<double>(count);
  std::vector<double> ss(kCoordsPerFrame, 0.0);
  for (const auto& seq : sequences) {
    const auto v = seq.positions.values();
    for (std::size_t f = 0; f < seq.positions.frames(); ++f) {
      for (std::size_t c = 0; c < kCoordsPerFrame; ++c) {
        const double d = v[f * kCoordsPerFrame + c] - s.mean[c];
        ss[c] += d * d;
      }
    }
  }
  for (std::size_t c = 0; c < kCoordsPerFrame; ++c) {
    s.std[c] = std::max(std::sqrt(ss[c] / static_cast<double>(count)), kScalerStdFloor);
  }
  return s;
}

MotionSequence standardize(const MotionSequence& seq, const Scaler& s) {
  s.validate();
  MotionSequence out = seq;
  auto v = out.positions.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t c = i % kCoordsPerFrame;
    v[i] = (v[i] - s.mean[c]) / s.std[c];
  }
  return out;
}

MotionSequence destandardize(const MotionSequence& seq, const Scaler& s) {
  s.validate();
  MotionSequence out = seq;
  auto v = out.positions.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::size_t c = i % kCoordsPerFrame;
    v[i] = v[i] * s.std[c] + s.mean[c];
  }
  return out;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& physical, const Scaler& s) {
  require(physical.rows() == static_cast<Eigen::Index>(kCoordsPerFrame), "expected 45 rows");
  Eigen::MatrixXd out(physical.rows(), physical.cols());
  for (Eigen::Index c = 0; c < physical.rows(); ++c) {
    out.row(c) = (physical.row(c).array() - s.mean[c]) / s.std[c];
  }
  return out;
}

Eigen::MatrixXd destandardize(const Eigen::MatrixXd& standardized, const Scaler& s) {
  require(standardized.rows() == static_cast<Eigen::Index>(kCoordsPerFrame), "expected 45 rows");
  Eigen::MatrixXd out(standardized.rows(), standardized.cols());
  for (Eigen::Index c = 0; c < standardized.rows(); ++c) {
    out.row(c) = standardized.row(c).array() * s.std[c] + s.mean[c];
  }
  return out;
}

}  // namespace pmgf
