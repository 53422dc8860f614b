#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pmgf/features.hpp"
#include "pmgf/vae.hpp"

namespace pmgf {

LatentVector interpolate(const LatentVector& z_original, const LatentVector& z_target, double alpha);

// Decodes the blend at alpha = k / (steps - 1), k = 0..steps-1. Motions are
// destandardized, right-handed, release at frame 83.
std::vector<MotionSequence> interpolation_sweep(const VAE& model, const Scaler& scaler, const LatentVector& z_original,
                                                const LatentVector& z_target, int steps = 11);

// z + r * u; u must be a unit vector within 1e-6.
LatentVector hypersphere_shift(const LatentVector& z, const Eigen::VectorXd& u, double r);

MotionSequence decode_motion(const VAE& model, const Scaler& scaler, const LatentVector& z);
std::vector<MotionSequence> decode_motions(const VAE& model, const Scaler& scaler, const Eigen::MatrixXd& zs);

struct FitnessParams {
  // F1 is a movement to reduce, hence the negative weight.
  std::vector<double> weights = {-1, 1, 1, 1, 1, 1, 1, 1};
  double nash_sensitivity = 5.0;
  DeltaNormalization norms;

  void validate() const;
};

inline constexpr double kNashFactorFloor = 1e-6;

struct NashEvaluation {
  double value = 0;
  int floored_factors = 0;
};

// prod_i max(1 + a * w_i * delta_i, 1e-6) ^ (1/K), K = weights.size().
NashEvaluation nash_evaluate(std::span<const double> delta, const FitnessParams& params);
double nash_fitness(std::span<const double> delta, const FitnessParams& params);

struct ESConfig {
  double radius = 3.0;
  double sigma = 0.1;
  double learning_rate = 0.5;
  int perturbations = 128;
  int iterations = 20;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ESState {
  Eigen::VectorXd mean_direction;
  int iteration = 0;
  double best_fitness = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_direction;
  // Per iteration: fitness of the mean direction before the update, and the
  // best and average candidate fitness.
  std::vector<double> mean_fitness, best_candidate_fitness, average_candidate_fitness;
};

// Evaluates every column (a unit direction) and returns one fitness each.
using BatchFitness = std::function<std::vector<double>(const Eigen::MatrixXd& directions)>;

// Uniform direction on the sphere and a fresh state.
ESState es_init(int dim, std::uint64_t seed);

// Centered-rank utilities rank / (n - 1) - 0.5 in ascending fitness order,
// ties ordered by index.
std::vector<double> centered_ranks(std::span<const double> fitness);

// One iteration: mirrored sampling around m, unit-normalised candidates,
// rank-weighted update, renormalisation.
void es_step(ESState& state, const BatchFitness& fitness, const ESConfig& config, std::uint64_t iteration_seed);

// Runs config.iterations steps from a random start.
ESState es_search(int dim, const BatchFitness& fitness, const ESConfig& config);

struct OptimizationResult {
  Eigen::VectorXd direction;
  std::vector<LatentVector> original_latents, shifted_latents;
  std::vector<MotionSequence> original_motions, optimized_motions;
  std::vector<FeatureVector> original_features, optimized_features;
  ESState state;
  long floored_evaluations = 0;  // candidate-trial evaluations with a floored factor or decode failure
  ESConfig config;
  FitnessParams params;
};

// One direction for an athlete, fitness averaged over the trial latents.
OptimizationResult es_optimize(std::span<const LatentVector> z_trials, const VAE& model, const Scaler& scaler,
                               const FitnessParams& params, const ESConfig& config);

}  // namespace pmgf
