#include "pmgf/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pmgf/errors.hpp"
#include "pmgf/preprocess.hpp"

namespace pmgf {

namespace {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr Eigen::Index kDecodeChunk = 128;

}  // namespace

LatentVector interpolate(const LatentVector& z_original, const LatentVector& z_target, double alpha) {
  require(z_original.size() == z_target.size(), "interpolate: latent lengths differ");
  require(alpha >= 0.0 && alpha <= 1.0, "interpolate: alpha must lie in [0, 1]");
  if (alpha == 0.0) return z_original;
  if (alpha == 1.0) return z_target;
  return (1.0 - alpha) * z_original + alpha * z_target;
}

MotionSequence decode_motion(const VAE& model, const Scaler& scaler, const LatentVector& z) {
  return decode_motions(model, scaler, z).front();
}

std::vector<MotionSequence> decode_motions(const VAE& model, const Scaler& scaler, const Eigen::MatrixXd& zs) {
  std::vector<MotionSequence> out;
  out.reserve(static_cast<std::size_t>(zs.cols()));
  for (Eigen::Index start = 0; start < zs.cols(); start += kDecodeChunk) {
    const Eigen::Index len = std::min(kDecodeChunk, zs.cols() - start);
    for (const auto& m : model.decode_batch(zs.middleCols(start, len))) {
      MotionSequence seq;
      from_matrix(destandardize(m, scaler), seq);
      out.push_back(std::move(seq));
    }
  }
  return out;
}

std::vector<MotionSequence> interpolation_sweep(const VAE& model, const Scaler& scaler, const LatentVector& z_original,
                                                const LatentVector& z_target, int steps) {
  require(steps >= 2, "interpolation_sweep needs at least 2 steps");
  Eigen::MatrixXd zs(z_original.size(), steps);
  for (int k = 0; k < steps; ++k) {
    const double alpha = k == steps - 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(steps - 1);
    zs.col(k) = interpolate(z_original, z_target, alpha);
  }
  return decode_motions(model, scaler, zs);
}

LatentVector hypersphere_shift(const LatentVector& z, const Eigen::VectorXd& u, double r) {
  require(z.size() == u.size(), "hypersphere_shift: direction length differs from latent length");
  require(std::abs(u.norm() - 1.0) <= 1e-6, "hypersphere_shift: direction must be a unit vector");
  require(r >= 0.0 && std::isfinite(r), "hypersphere_shift: radius must be non-negative");
  return z + r * u;
}

void FitnessParams::validate() const {
  require(!weights.empty(), "fitness needs at least one weight");
  require(nash_sensitivity > 0.0, "nash sensitivity must be positive");
}

NashEvaluation nash_evaluate(std::span<const double> delta, const FitnessParams& params) {
  require(delta.size() == params.weights.size(), "delta length must equal the number of weights");
  NashEvaluation out;
  double product = 1.0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    double factor = 1.0 + params.nash_sensitivity * params.weights[i] * delta[i];
    if (!(factor >= kNashFactorFloor)) {
      factor = kNashFactorFloor;
      ++out.floored_factors;
    }
    product *= factor;
  }
  out.value = delta.size() == 1 ? product : std::pow(product, 1.0 / static_cast<double>(delta.size()));
  return out;
}

double nash_fitness(std::span<const double> delta, const FitnessParams& params) {
  return nash_evaluate(delta, params).value;
}

void ESConfig::validate() const {
  require(radius > 0 && sigma > 0 && learning_rate > 0, "ES radius, sigma and learning rate must be positive");
  require(perturbations >= 1 && iterations >= 1, "ES needs at least one perturbation and one iteration");
}

ESState es_init(int dim, std::uint64_t seed) {
  require(dim >= 1, "ES dimension must be positive");
  std::mt19937_64 rng(mix_seed(seed));
  std::normal_distribution<double> n01;
  Eigen::VectorXd m(dim);
  do {
    for (int i = 0; i < dim; ++i) m(i) = n01(rng);
  } while (m.norm() == 0.0);
  ESState s;
  s.mean_direction = m.normalized();
  s.best_direction = s.mean_direction;
  return s;
}

std::vector<double> centered_ranks(std::span<const double> fitness) {
  const std::size_t n = fitness.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) {
    return std::isnan(fitness[i]) ? -std::numeric_limits<double>::infinity() : fitness[i];
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  std::vector<double> util(n, 0.0);
  if (n < 2) return util;
  for (std::size_t rank = 0; rank < n; ++rank) {
    util[order[rank]] = static_cast<double>(rank) / static_cast<double>(n - 1) - 0.5;
  }
  return util;
}

void es_step(ESState& state, const BatchFitness& fitness, const ESConfig& config, std::uint64_t iteration_seed) {
  config.validate();
  const Eigen::Index dim = state.mean_direction.size();
  const int n = config.perturbations;
  const Eigen::VectorXd& m = state.mean_direction;
  std::mt19937_64 rng(mix_seed(iteration_seed));
  std::normal_distribution<double> n01;

  // Columns 2k and 2k+1 are the mirrored pair; the last column is m itself.
  Eigen::MatrixXd cand(dim, 2 * n + 1);
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd eps(dim);
    for (Eigen::Index i = 0; i < dim; ++i) eps(i) = config.sigma * n01(rng);
    const Eigen::VectorXd plus = m + eps, minus = m - eps;
    cand.col(2 * k) = plus.norm() > 0 ? Eigen::VectorXd(plus.normalized()) : m;
    cand.col(2 * k + 1) = minus.norm() > 0 ? Eigen::VectorXd(minus.normalized()) : m;
  }
  cand.col(2 * n) = m;
  const std::vector<double> f = fitness(cand);
  require(f.size() == static_cast<std::size_t>(2 * n + 1), "fitness callback returned the wrong number of values");

  const std::span<const double> fc(f.data(), static_cast<std::size_t>(2 * n));
  const std::vector<double> util = centered_ranks(fc);
  Eigen::VectorXd step = Eigen::VectorXd::Zero(dim);
  for (int c = 0; c < 2 * n; ++c) step += util[static_cast<std::size_t>(c)] * (cand.col(c) - m);
  step /= static_cast<double>(n) * config.sigma;

  double best = -std::numeric_limits<double>::infinity(), sum = 0.0;
  Eigen::Index best_col = 0;
  for (int c = 0; c < 2 * n; ++c) {
    sum += f[static_cast<std::size_t>(c)];
    if (f[static_cast<std::size_t>(c)] > best) {
      best = f[static_cast<std::size_t>(c)];
      best_col = c;
    }
  }
  state.mean_fitness.push_back(f.back());
  state.best_candidate_fitness.push_back(best);
  state.average_candidate_fitness.push_back(sum / (2.0 * n));
  if (best > state.best_fitness) {
    state.best_fitness = best;
    state.best_direction = cand.col(best_col);
  }
  if (f.back() > state.best_fitness) {
    state.best_fitness = f.back();
    state.best_direction = m;
  }

  const Eigen::VectorXd next = m + config.learning_rate * step;
  if (next.norm() > 0) state.mean_direction = next.normalized();
  ++state.iteration;
}

ESState es_search(int dim, const BatchFitness& fitness, const ESConfig& config) {
  config.validate();
  ESState state = es_init(dim, config.seed);
  for (int it = 0; it < config.iterations; ++it) {
    es_step(state, fitness, config, config.seed * 1000003ULL + static_cast<std::uint64_t>(it) + 1);
  }
  return state;
}

OptimizationResult es_optimize(std::span<const LatentVector> z_trials, const VAE& model, const Scaler& scaler,
                               const FitnessParams& params, const ESConfig& config) {
  require(!z_trials.empty(), "es_optimize needs at least one trial latent");
  params.validate();
  config.validate();
  require(params.weights.size() == kFeatureCount, "es_optimize needs one weight per feature");
  const int dz = model.config().latent_dim;
  for (const auto& z : z_trials) require(z.size() == dz, "trial latent has the wrong length");
  const auto n_trials = static_cast<Eigen::Index>(z_trials.size());

  OptimizationResult res;
  res.config = config;
  res.params = params;
  res.original_latents.assign(z_trials.begin(), z_trials.end());
  Eigen::MatrixXd z0(dz, n_trials);
  for (Eigen::Index t = 0; t < n_trials; ++t) z0.col(t) = z_trials[static_cast<std::size_t>(t)];
  res.original_motions = decode_motions(model, scaler, z0);
  for (const auto& m : res.original_motions) res.original_features.push_back(extract_features(m));

  const FitnessParams& p = params;
  const double floor_fitness = kNashFactorFloor;
  auto evaluate = [&](const Eigen::MatrixXd& dirs) {
    const Eigen::Index n_dirs = dirs.cols();
    Eigen::MatrixXd zs(dz, n_dirs * n_trials);
    for (Eigen::Index c = 0; c < n_dirs; ++c) {
      for (Eigen::Index t = 0; t < n_trials; ++t) zs.col(c * n_trials + t) = z0.col(t) + config.radius * dirs.col(c);
    }
    std::vector<double> f(static_cast<std::size_t>(n_dirs), 0.0);
    for (Eigen::Index start = 0; start < zs.cols(); start += kDecodeChunk) {
      const Eigen::Index len = std::min(kDecodeChunk, zs.cols() - start);
      std::vector<Eigen::MatrixXd> decoded;
      bool chunk_ok = true;
      try {
        decoded = model.decode_batch(zs.middleCols(start, len));
      } catch (const std::exception&) {
        chunk_ok = false;
      }
      for (Eigen::Index i = 0; i < len; ++i) {
        const Eigen::Index col = start + i;
        const auto t = static_cast<std::size_t>(col % n_trials);
        double value = floor_fitness;
        bool floored = true;
        if (chunk_ok) {
          try {
            MotionSequence seq;
            from_matrix(destandardize(decoded[static_cast<std::size_t>(i)], scaler), seq);
            const auto d = delta(res.original_features[t], extract_features(seq), p.norms);
            const NashEvaluation ne = nash_evaluate(d, p);
            value = ne.value;
            floored = ne.floored_factors > 0;
          } catch (const std::exception&) {
          }
        }
        if (floored) ++res.floored_evaluations;
        f[static_cast<std::size_t>(col / n_trials)] += value / static_cast<double>(n_trials);
      }
    }
    return f;
  };

  res.state = es_search(dz, evaluate, config);
  res.direction = res.state.mean_direction;
  Eigen::MatrixXd z1(dz, n_trials);
  for (Eigen::Index t = 0; t < n_trials; ++t) {
    res.shifted_latents.push_back(hypersphere_shift(z0.col(t), res.direction, config.radius));
    z1.col(t) = res.shifted_latents.back();
  }
  res.optimized_motions = decode_motions(model, scaler, z1);
  for (const auto& m : res.optimized_motions) res.optimized_features.push_back(extract_features(m));
  return res;
}

}  // namespace pmgf
