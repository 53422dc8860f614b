#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "pmgf/features.hpp"

namespace pmgf {

struct TTestResult {
  double t = 0;
  double df = 0;
  double p = 0;  // two-sided
};

// Throws NumericalError ("degenerate") when the differences have zero
// variance.
TTestResult paired_t_test(std::span<const double> before, std::span<const double> after);

struct HolmResult {
  std::vector<double> adjusted;
  std::vector<bool> reject;
};

HolmResult holm_bonferroni(std::span<const double> p_values, double alpha_level = 0.05);

// mean(after - before) / sd(after - before) with the n-1 denominator.
double cohens_d_paired(std::span<const double> before, std::span<const double> after);

struct FeatureStats {
  double mean_difference = 0;  // after - before, in the feature's unit
  double t = 0, df = 0;
  double p_raw = 1, p_adjusted = 1;
  double cohens_d = 0;  // signed so that positive means the weighted direction
  bool reject = false;
  bool degenerate = false;  // zero-variance differences: no test, d reported as 0
};

struct StatsReport {
  std::array<FeatureStats, kFeatureCount> features;
  std::size_t cohort_size = 0;
  std::string model_id;

  double total_effect() const;
};

// Paired comparison per feature. Differences of features with a negative
// weight are negated before Cohen's d; Holm runs over the non-degenerate
// features.
StatsReport feature_stats(std::span<const FeatureVector> before, std::span<const FeatureVector> after,
                          std::span<const double> weights, std::string model_id, double alpha_level = 0.05);

}  // namespace pmgf
