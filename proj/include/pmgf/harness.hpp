#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pmgf/guidance.hpp"
#include "pmgf/stats.hpp"
#include "pmgf/vae.hpp"

namespace pmgf {

struct PairSweep {
  std::string original_id, target_id;
  std::vector<double> alpha, to_original, to_target;
  // to_original nondecreasing and to_target nonincreasing in alpha.
  bool monotone = false;
};

struct DTWReport {
  std::vector<PairSweep> pairs;

  std::size_t pair_count() const { return pairs.size(); }
  std::size_t monotone_count() const;
  double monotone_fraction() const;
  // Distance to the original at alpha 0 and to the target at alpha 1 are 0
  // for every pair.
  bool endpoints_exact() const;
};

// Every unordered pair (i < j, athlete order) interpolated from i to j.
DTWReport transfer_sweep(std::span<const std::string> athlete_ids, std::span<const LatentVector> representatives,
                         const VAE& model, const Scaler& scaler, int steps = 11);

struct AthleteTrials {
  std::string athlete_id;
  std::vector<std::size_t> trials;  // indices into the sequence list, in list order
  double mean_ball_velocity_mph = 0;
};

// Athletes in order of first appearance.
std::vector<AthleteTrials> group_by_athlete(std::span<const MotionSequence> sequences);

// Index of the fastest trial of each athlete (ties: smaller trial id).
std::vector<std::size_t> representative_trials(std::span<const MotionSequence> sequences);

// floor(n / 3) athletes (at least one) with the lowest mean ball velocity,
// slowest first; ties by athlete id.
std::vector<AthleteTrials> lower_third_athletes(std::span<const MotionSequence> sequences);

struct ManipulationRun {
  std::string model_id;
  std::vector<std::string> athlete_ids;
  std::vector<std::vector<std::string>> trial_ids;
  std::vector<OptimizationResult> results;
  // Paired over athletes, each athlete's features averaged over its trials.
  StatsReport stats;
};

// Encodes each selected athlete's trials (posterior means), runs es_optimize
// per athlete and tests original against optimized decoded features.
// Sequences are physical, right-handed and 101 frames long. The ES seed of
// athlete k is config.seed + 7919 * k.
ManipulationRun run_manipulation(const VAE& model, const Scaler& scaler, std::span<const MotionSequence> sequences,
                                 std::span<const AthleteTrials> athletes, const FitnessParams& params,
                                 const ESConfig& config, std::string model_id);

struct ModelInstance {
  std::string id;
  VAE model;
  Scaler scaler;
};

struct RadiusSweep {
  std::vector<double> radii;
  std::vector<std::string> model_ids;
  Eigen::MatrixXd total_effect;  // models x radii
  std::vector<std::vector<StatsReport>> stats;  // [model][radius]

  Eigen::VectorXd mean() const;
  Eigen::VectorXd sd() const;  // sample SD over models, 0 for a single model
};

RadiusSweep radius_sweep(std::span<const ModelInstance> models, std::span<const MotionSequence> sequences,
                         std::span<const AthleteTrials> athletes, std::span<const double> radii,
                         const FitnessParams& params, const ESConfig& config);

// Report files.
void write_dtw_csv(const std::filesystem::path& path, const DTWReport& r);
// Rows are features; each model contributes mean difference, adjusted p and
// Cohen's d columns.
void write_stats_csv(const std::filesystem::path& path, std::span<const StatsReport> reports);
// Rows are models plus mean and SD; columns are radii.
void write_radius_csv(const std::filesystem::path& path, const RadiusSweep& s);

void write_optimization_json(const std::filesystem::path& path, const ManipulationRun& run);
// Rebuilds ids, features, direction and fitness traces; motions and latents
// are not stored.
ManipulationRun read_optimization_json(const std::filesystem::path& path);

}  // namespace pmgf
