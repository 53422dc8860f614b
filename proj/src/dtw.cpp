#include "pmgf/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pmgf/errors.hpp"

namespace pmgf {

double dtw_distance(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "dtw_distance needs non-empty series");
  const std::size_t m = b.size();
  // Two rolling rows of the cumulative cost table.
  std::vector<double> prev(m), cur(m);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double cost = std::abs(a[i] - b[j]);
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else if (i == 0) {
        best = cur[j - 1];
      } else if (j == 0) {
        best = prev[j];
      } else {
        best = std::min({prev[j], cur[j - 1], prev[j - 1]});
      }
      cur[j] = cost + best;
    }
    std::swap(prev, cur);
  }
  return prev[m - 1];
}

double s_motion(const MotionSequence& m1, const MotionSequence& m2) {
  const std::size_t frames = m1.positions.frames();
  require(frames > 0 && frames == m2.positions.frames(), "s_motion needs sequences with the same number of frames");
  double total = 0.0;
  for (std::size_t j = 0; j < kJointCount; ++j) {
    for (std::size_t axis = 0; axis < kAxes; ++axis) {
      const auto id = static_cast<JointId>(j);
      const std::vector<double> a = m1.positions.series(id, axis), b = m2.positions.series(id, axis);
      total += dtw_distance(a, b);
    }
  }
  return total / static_cast<double>(frames * kCoordsPerFrame);
}

}  // namespace pmgf
