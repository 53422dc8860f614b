#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pmgf/motion.hpp"

namespace pmgf {

struct VAEConfig {
  int model_dim = 256;
  int latent_dim = 256;
  int encoder_layers = 3;
  int decoder_layers = 3;
  int attention_heads = 8;
  int ff_dim = 1024;
  int frames = static_cast<int>(kNormalizedFrames);
  int joints = static_cast<int>(kJointCount);
  double lambda_kl = 1e-3;
  double lambda_speed = 1.0;
  double learning_rate = 1e-4;
  int epochs = 2000;
  int batch_size = 64;
  std::uint64_t seed = 0;

  int coords() const { return 3 * joints; }
  // Positive dims, model_dim divisible by heads, non-negative weights.
  void validate() const;

  friend bool operator==(const VAEConfig&, const VAEConfig&) = default;
};

using LatentVector = Eigen::VectorXd;

inline constexpr double kLogVarianceMin = -10.0;
inline constexpr double kLogVarianceMax = 10.0;

struct LatentDistribution {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_variance;

  void validate() const;
};

struct LossTerms {
  double total = 0, recon = 0, kl = 0, speed = 0;
};

// Loss of one reconstruction; x and x_hat are (3*joints x frames).
LossTerms loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat, const LatentDistribution& dist,
               const VAEConfig& config);

// z = mu + exp(log_var / 2) * eps with eps drawn from a seeded generator.
LatentVector sample_latent(const LatentDistribution& dist, std::uint64_t seed);

template <class S>
using AlignedBuffer = std::vector<S, Eigen::aligned_allocator<S>>;

template <class Scalar>
class TransformerVAE {
 public:
  // Weights initialised from config.seed.
  explicit TransformerVAE(const VAEConfig& config);
  ~TransformerVAE();
  TransformerVAE(const TransformerVAE&);
  TransformerVAE& operator=(const TransformerVAE&);
  TransformerVAE(TransformerVAE&&) noexcept;
  TransformerVAE& operator=(TransformerVAE&&) noexcept;

  const VAEConfig& config() const { return config_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<Scalar> parameters() { return params_; }
  std::span<const Scalar> parameters() const { return params_; }

  // Input is standardized (3*joints x frames).
  LatentDistribution encode(const Eigen::MatrixXd& x) const;
  std::vector<LatentDistribution> encode_batch(std::span<const Eigen::MatrixXd> xs) const;
  LatentVector encode_mean(const Eigen::MatrixXd& x) const { return encode(x).mean; }

  Eigen::MatrixXd decode(const LatentVector& z) const;
  // One latent per column.
  std::vector<Eigen::MatrixXd> decode_batch(const Eigen::MatrixXd& zs) const;

  // Batch loss with fixed reparameterisation noise (latent_dim x batch); the
  // gradient with respect to every parameter is written to `grad` when it is
  // non-empty.
  LossTerms loss_and_gradient(std::span<const Eigen::MatrixXd> batch, const Eigen::MatrixXd& eps,
                              std::span<Scalar> grad) const;

 private:
  struct Layout;
  VAEConfig config_;
  AlignedBuffer<Scalar> params_;
  std::unique_ptr<Layout> layout_;
};

extern template class TransformerVAE<float>;
extern template class TransformerVAE<double>;

using VAE = TransformerVAE<float>;

struct TrainReport {
  std::vector<double> recon, kl, speed, total;  // per epoch, sample-weighted means
  std::vector<double> joint_rmse_mm;            // per joint, after training
  double rmse_mm = 0;                           // mean of joint_rmse_mm
  double wall_time_s = 0;
  VAEConfig config;
};

struct TrainOptions {
  // Called after every epoch with (epoch index, epoch terms); return false
  // to stop early.
  std::function<bool(int, const LossTerms&)> on_epoch;
  // Warm start from these weights instead of a fresh initialisation. The
  // architecture must match; optimiser moments start at zero.
  const VAE* initial = nullptr;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8). The corpus is standardized; the
// scaler is only used to report RMSE in millimetres.
std::pair<VAE, TrainReport> train(std::span<const Eigen::MatrixXd> corpus, const Scaler& scaler,
                                  const VAEConfig& config, const TrainOptions& options = {});

// Per-joint RMSE in mm of decode(encode_mean(x)) against x over the corpus,
// both destandardized.
std::vector<double> reconstruction_rmse_mm(const VAE& model, std::span<const Eigen::MatrixXd> corpus,
                                           const Scaler& scaler);

}  // namespace pmgf
