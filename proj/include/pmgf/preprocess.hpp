#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "pmgf/motion.hpp"

namespace pmgf {

// Second-order section, direct form II transposed. a0 is normalized to 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

// Fourth-order Butterworth low-pass as two cascaded biquads (bilinear
// transform with frequency prewarping).
std::array<Biquad, 2> butterworth_lowpass4(double cutoff_hz, double sample_rate_hz);

// |H(f)| of a single (one-directional) pass of the cascade.
double magnitude_response(std::span<const Biquad> sections, double freq_hz, double sample_rate_hz);

// Number of samples reflected at each end before forward-backward filtering.
inline constexpr std::size_t kFiltfiltPad = 15;

// Zero-phase forward-backward filtering with odd-reflection padding and
// steady-state initial conditions. Requires more than kFiltfiltPad samples.
std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x);

inline constexpr double kDefaultCutoffHz = 13.4;

// Cutoff chosen per capture. `residual_analysis = false` selects the fixed
// kDefaultCutoffHz.
struct AutoCutoff {
  bool residual_analysis = true;
  double min_hz = 1.0;
  double max_hz = 30.0;
  double step_hz = 0.5;
};

using Cutoff = std::variant<double, AutoCutoff>;

// Residual analysis over all 45 series: the residual RMS between raw and
// filtered data is tabulated against cutoff, a line is fitted to the upper
// (noise-dominated) half, and the lowest cutoff whose residual falls to the
// line's zero-frequency intercept is selected.
double residual_analysis_cutoff(const RawCapture& raw, const AutoCutoff& spec);

double resolve_cutoff(const RawCapture& raw, const Cutoff& cutoff);

RawCapture lowpass_filter(const RawCapture& raw, const Cutoff& cutoff);

// Forward-difference speed of the throwing-side wrist; returns the index of
// the fastest interval (earliest on ties).
std::size_t detect_release(const RawCapture& raw);

// Cuts [release - 1.0 s, release + 0.2 s] and linearly resamples each scalar
// series to 101 frames. release_frame is set to 83.
MotionSequence segment_and_normalize(const RawCapture& raw, std::size_t release);

// Handedness canonicalization, filtering, release detection, segmentation.
MotionSequence preprocess(const RawCapture& raw, const Cutoff& cutoff);

Scaler fit_scaler(std::span<const MotionSequence> sequences);

MotionSequence standardize(const MotionSequence& seq, const Scaler& s);
MotionSequence destandardize(const MotionSequence& seq, const Scaler& s);

// Column-per-frame (45 x T) variants used around the VAE.
Eigen::MatrixXd standardize(const Eigen::MatrixXd& physical, const Scaler& s);
Eigen::MatrixXd destandardize(const Eigen::MatrixXd& standardized, const Scaler& s);

}  // namespace pmgf
