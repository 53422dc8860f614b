#include "pmgf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "pmgf/errors.hpp"

namespace pmgf {

namespace {

std::vector<double> differences(std::span<const double> before, std::span<const double> after) {
  require(before.size() == after.size(), "paired samples must have equal lengths");
  require(before.size() >= 2, "paired samples need at least 2 observations");
  std::vector<double> d(before.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = after[i] - before[i];
  return d;
}

struct MeanSd {
  double mean, sd;
};

MeanSd mean_sd(const std::vector<double>& d) {
  const auto n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

// Differences that are equal up to rounding (after == before + c computed in
// floating point) count as zero variance.
bool degenerate(const std::vector<double>& d, const MeanSd& ms) {
  double scale = 0.0;
  for (double v : d) scale = std::max(scale, std::abs(v));
  return !(ms.sd > 64.0 * std::numeric_limits<double>::epsilon() * scale);
}

}  // namespace

TTestResult paired_t_test(std::span<const double> before, std::span<const double> after) {
  const std::vector<double> d = differences(before, after);
  const MeanSd ms = mean_sd(d);
  if (degenerate(d, ms)) throw NumericalError("degenerate: paired differences have zero variance");
  TTestResult r;
  r.df = static_cast<double>(d.size() - 1);
  r.t = ms.mean / (ms.sd / std::sqrt(static_cast<double>(d.size())));
  const boost::math::students_t dist(r.df);
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

HolmResult holm_bonferroni(std::span<const double> p_values, double alpha_level) {
  for (double p : p_values) require(p >= 0.0 && p <= 1.0, "p values must lie in [0, 1]");
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  HolmResult r;
  r.adjusted.assign(m, 1.0);
  r.reject.assign(m, false);
  double running = 0.0;
  bool still_rejecting = true;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = order[k];
    running = std::max(running, std::min(1.0, static_cast<double>(m - k) * p_values[i]));
    r.adjusted[i] = running;
    still_rejecting = still_rejecting && running < alpha_level;
    r.reject[i] = still_rejecting;
  }
  return r;
}

double cohens_d_paired(std::span<const double> before, std::span<const double> after) {
  const std::vector<double> d = differences(before, after);
  const MeanSd ms = mean_sd(d);
  if (degenerate(d, ms)) throw NumericalError("degenerate: paired differences have zero variance");
  return ms.mean / ms.sd;
}

double StatsReport::total_effect() const {
  double s = 0.0;
  for (const auto& f : features) s += f.cohens_d;
  return s;
}

StatsReport feature_stats(std::span<const FeatureVector> before, std::span<const FeatureVector> after,
                          std::span<const double> weights, std::string model_id, double alpha_level) {
  require(before.size() == after.size(), "before and after feature lists differ in length");
  require(weights.size() == kFeatureCount, "feature_stats needs one weight per feature");
  StatsReport rep;
  rep.cohort_size = before.size();
  rep.model_id = std::move(model_id);
  std::vector<double> raw;
  std::vector<std::size_t> tested;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    std::vector<double> b(before.size()), a(after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
      b[i] = before[i][k];
      a[i] = after[i][k];
    }
    FeatureStats& fs = rep.features[k];
    const std::vector<double> d = differences(b, a);
    const MeanSd ms = mean_sd(d);
    fs.mean_difference = ms.mean;
    if (degenerate(d, ms)) {
      fs.degenerate = true;
      continue;
    }
    const TTestResult t = paired_t_test(b, a);
    fs.t = t.t;
    fs.df = t.df;
    fs.p_raw = t.p;
    const double sign = weights[k] < 0 ? -1.0 : 1.0;
    fs.cohens_d = sign * ms.mean / ms.sd;
    raw.push_back(t.p);
    tested.push_back(k);
  }
  const HolmResult h = holm_bonferroni(raw, alpha_level);
  for (std::size_t i = 0; i < tested.size(); ++i) {
    rep.features[tested[i]].p_adjusted = h.adjusted[i];
    rep.features[tested[i]].reject = h.reject[i];
  }
  return rep;
}

}  // namespace pmgf
