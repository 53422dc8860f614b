#pragma once

#include <span>

#include "pmgf/motion.hpp"

namespace pmgf {

// Unconstrained DTW with |a_i - b_j| local cost; both ends aligned.
double dtw_distance(std::span<const double> a, std::span<const double> b);

// Sum of per-(joint, axis) DTW distances divided by frames * 45.
double s_motion(const MotionSequence& m1, const MotionSequence& m2);

}  // namespace pmgf
