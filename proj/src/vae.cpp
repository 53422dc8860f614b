#include "pmgf/vae.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "pmgf/errors.hpp"
#include "pmgf/preprocess.hpp"

namespace pmgf {

namespace {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

constexpr double kLayerNormEps = 1e-5;

struct Slot {
  std::size_t offset = 0;
  Eigen::Index rows = 0, cols = 1;
  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

struct BlockSlots {
  Slot ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
};

// Every slot starts on a 64-byte boundary of the (aligned) parameter buffer.
// Eigen's vectorised kernels peel differently depending on the address, so
// a fixed alignment is what makes results independent of where the buffer
// happens to be allocated.
constexpr std::size_t kSlotAlign = 16;

struct SlotAllocator {
  std::size_t total = 0;
  Slot operator()(Eigen::Index rows, Eigen::Index cols = 1) {
    Slot s{total, rows, cols};
    total += (s.size() + kSlotAlign - 1) / kSlotAlign * kSlotAlign;
    return s;
  }
};

BlockSlots make_block(SlotAllocator& alloc, Eigen::Index d, Eigen::Index ff) {
  BlockSlots b;
  b.ln1_g = alloc(d);
  b.ln1_b = alloc(d);
  b.wq = alloc(d, d);
  b.bq = alloc(d);
  b.wk = alloc(d, d);
  b.bk = alloc(d);
  b.wv = alloc(d, d);
  b.bv = alloc(d);
  b.wo = alloc(d, d);
  b.bo = alloc(d);
  b.ln2_g = alloc(d);
  b.ln2_b = alloc(d);
  b.w1 = alloc(ff, d);
  b.b1 = alloc(ff);
  b.w2 = alloc(d, ff);
  b.b2 = alloc(d);
  return b;
}

template <class S>
Mat<S> positional_encoding(Eigen::Index d, Eigen::Index frames) {
  Mat<S> pe(d, frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      pe(i, t) = static_cast<S>(std::sin(static_cast<double>(t) * freq));
      if (i + 1 < d) pe(i + 1, t) = static_cast<S>(std::cos(static_cast<double>(t) * freq));
    }
  }
  return pe;
}

template <class S>
struct LayerNormCache {
  Mat<S> xhat;
  RowVec<S> inv;
};

template <class S>
struct BlockCache {
  Mat<S> in, a, q, k, v, o, h1, b, f;
  LayerNormCache<S> ln1, ln2;
  std::vector<Mat<S>> p;  // attention weights per (sample, head)
};

// Column-wise layer norm: y = g * (x - mean) / sqrt(var + eps) + b.
template <class S, class G, class B>
Mat<S> layer_norm(const Mat<S>& x, const G& g, const B& b, LayerNormCache<S>* cache) {
  const Eigen::Index d = x.rows();
  const RowVec<S> mean = x.colwise().mean();
  Mat<S> xc = x.rowwise() - mean;
  const RowVec<S> var = xc.array().square().colwise().sum() / static_cast<S>(d);
  const RowVec<S> inv = (var.array() + static_cast<S>(kLayerNormEps)).rsqrt();
  xc.array().rowwise() *= inv.array();
  Mat<S> y = (xc.array().colwise() * g.array()).colwise() + b.array();
  if (cache) {
    cache->xhat = std::move(xc);
    cache->inv = inv;
  }
  return y;
}

template <class S, class G>
Mat<S> layer_norm_backward(const Mat<S>& dy, const G& g, const LayerNormCache<S>& c, Eigen::Map<Vec<S>> dg,
                           Eigen::Map<Vec<S>> db) {
  const auto d = static_cast<S>(dy.rows());
  dg += (dy.array() * c.xhat.array()).rowwise().sum().matrix();
  db += dy.rowwise().sum();
  const Mat<S> dxhat = dy.array().colwise() * g.array();
  const RowVec<S> sum_dxhat = dxhat.colwise().sum();
  const RowVec<S> sum_dxhat_xhat = (dxhat.array() * c.xhat.array()).colwise().sum();
  Mat<S> dx = (dxhat * d).rowwise() - sum_dxhat;
  dx -= (c.xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
  dx.array().rowwise() *= (c.inv.array() / d);
  return dx;
}

// Column-wise softmax in place.
template <class S>
void softmax_columns(Mat<S>& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    auto col = m.col(c);
    const S mx = col.maxCoeff();
    col = (col.array() - mx).exp();
    col /= col.sum();
  }
}

}  // namespace

void VAEConfig::validate() const {
  require(model_dim > 0 && latent_dim > 0 && encoder_layers >= 0 && decoder_layers >= 0 && attention_heads > 0 &&
              ff_dim > 0 && frames > 0 && joints > 0,
          "VAE dimensions must be positive");
  require(model_dim % attention_heads == 0, "model_dim must be divisible by attention_heads");
  require(lambda_kl >= 0 && lambda_speed >= 0, "loss weights must be non-negative");
  require(learning_rate > 0 && epochs >= 0 && batch_size > 0, "invalid training schedule");
}

void LatentDistribution::validate() const {
  require(mean.size() == log_variance.size() && mean.size() > 0, "latent mean and log-variance lengths differ");
  require(mean.allFinite() && log_variance.allFinite(), "latent distribution is not finite");
  require((log_variance.array() >= kLogVarianceMin).all() && (log_variance.array() <= kLogVarianceMax).all(),
          "log-variance outside [-10, 10]");
}

namespace {

// Loss over a batch laid out as (coords x batch*frames); gradients are
// optional.
template <class S>
LossTerms loss_terms(const Mat<S>& x, const Mat<S>& y, const Mat<S>& mu, const Mat<S>& lv, Eigen::Index batch,
                     Eigen::Index frames, Eigen::Index joints, const VAEConfig& cfg, Mat<S>* dy, Mat<S>* dmu,
                     Mat<S>* dlv) {
  const Eigen::Index coords = 3 * joints;
  LossTerms t;
  const double n_recon = static_cast<double>(batch * frames * coords);
  double sq = 0.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < coords; ++r) {
      const double e = static_cast<double>(y(r, c)) - static_cast<double>(x(r, c));
      sq += e * e;
    }
  }
  t.recon = sq / n_recon;
  if (dy) *dy = (y - x) * static_cast<S>(2.0 / n_recon);

  double kl = 0.0;
  for (Eigen::Index b = 0; b < mu.cols(); ++b) {
    for (Eigen::Index k = 0; k < mu.rows(); ++k) {
      const double m = mu(k, b), l = lv(k, b);
      kl += 0.5 * (m * m + std::exp(l) - 1.0 - l);
    }
  }
  t.kl = kl / static_cast<double>(batch);
  if (dmu) *dmu = mu / static_cast<S>(batch);
  if (dlv) *dlv = ((lv.array().exp() - S(1)) * static_cast<S>(0.5 / static_cast<double>(batch))).matrix();

  double speed = 0.0;
  if (frames > 1) {
    const double n_speed = static_cast<double>(batch * (frames - 1) * joints);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index f = 0; f + 1 < frames; ++f) {
        const Eigen::Index c0 = b * frames + f;
        for (Eigen::Index j = 0; j < joints; ++j) {
          const Eigen::Matrix<S, 3, 1> vx = x.template block<3, 1>(3 * j, c0 + 1) - x.template block<3, 1>(3 * j, c0);
          const Eigen::Matrix<S, 3, 1> vy = y.template block<3, 1>(3 * j, c0 + 1) - y.template block<3, 1>(3 * j, c0);
          const double nx = static_cast<double>(vx.norm()), ny = static_cast<double>(vy.norm());
          const double diff = ny - nx;
          speed += diff * diff;
          if (dy && ny > 0.0) {
            const Eigen::Matrix<S, 3, 1> g = vy * static_cast<S>(2.0 * diff / (n_speed * ny));
            dy->template block<3, 1>(3 * j, c0 + 1) += g * static_cast<S>(cfg.lambda_speed);
            dy->template block<3, 1>(3 * j, c0) -= g * static_cast<S>(cfg.lambda_speed);
          }
        }
      }
    }
    speed /= n_speed;
  }
  t.speed = speed;
  if (dmu) *dmu *= static_cast<S>(cfg.lambda_kl);
  if (dlv) *dlv *= static_cast<S>(cfg.lambda_kl);
  t.total = t.recon + cfg.lambda_kl * t.kl + cfg.lambda_speed * t.speed;
  return t;
}

}  // namespace

LossTerms loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat, const LatentDistribution& dist,
               const VAEConfig& config) {
  require(x.rows() == config.coords() && x.cols() == config.frames, "loss: x has the wrong shape");
  require(x_hat.rows() == x.rows() && x_hat.cols() == x.cols(), "loss: x and x_hat shapes differ");
  require(dist.mean.size() == config.latent_dim && dist.log_variance.size() == config.latent_dim,
          "loss: latent distribution has the wrong length");
  return loss_terms<double>(x, x_hat, dist.mean, dist.log_variance, 1, config.frames, config.joints, config, nullptr,
                            nullptr, nullptr);
}

LatentVector sample_latent(const LatentDistribution& dist, std::uint64_t seed) {
  dist.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  LatentVector z(dist.mean.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = dist.mean(k) + std::exp(0.5 * dist.log_variance(k)) * n01(rng);
  return z;
}

template <class S>
struct TransformerVAE<S>::Layout {
  Slot in_w, in_b, enc_g, enc_b, mu_w, mu_b, lv_w, lv_b, z_w, z_b, dec_g, dec_b, out_w, out_b;
  std::vector<BlockSlots> enc, dec;
  std::size_t total = 0;
  Mat<S> pe;
};

namespace {

template <class S>
struct Params {
  S* base;
  Eigen::Map<Mat<S>> m(const Slot& s) const { return {base + s.offset, s.rows, s.cols}; }
  Eigen::Map<Vec<S>> v(const Slot& s) const { return {base + s.offset, s.rows}; }
};

template <class S>
struct ConstParams {
  const S* base;
  Eigen::Map<const Mat<S>> m(const Slot& s) const { return {base + s.offset, s.rows, s.cols}; }
  Eigen::Map<const Vec<S>> v(const Slot& s) const { return {base + s.offset, s.rows}; }
};

struct Shape {
  Eigen::Index batch, frames, heads;
};

// Pre-norm block: h1 = x + Attn(LN(x)); out = h1 + FFN(LN(h1)).
template <class S>
Mat<S> block_forward(const ConstParams<S>& P, const BlockSlots& s, const Mat<S>& x, const Shape& sh,
                     BlockCache<S>* cache) {
  const Eigen::Index d = x.rows(), T = sh.frames, dh = d / sh.heads;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  LayerNormCache<S> ln1, ln2;
  const Mat<S> a = layer_norm<S>(x, P.v(s.ln1_g), P.v(s.ln1_b), cache ? &ln1 : nullptr);
  Mat<S> q = (P.m(s.wq) * a).colwise() + P.v(s.bq);
  Mat<S> k = (P.m(s.wk) * a).colwise() + P.v(s.bk);
  Mat<S> v = (P.m(s.wv) * a).colwise() + P.v(s.bv);
  Mat<S> o(d, x.cols());
  if (cache) cache->p.resize(static_cast<std::size_t>(sh.batch * sh.heads));
  Mat<S> p;
  for (Eigen::Index b = 0; b < sh.batch; ++b) {
    for (Eigen::Index h = 0; h < sh.heads; ++h) {
      p.noalias() = k.block(h * dh, b * T, dh, T).transpose() * q.block(h * dh, b * T, dh, T);
      p *= scale;
      softmax_columns(p);
      o.block(h * dh, b * T, dh, T).noalias() = v.block(h * dh, b * T, dh, T) * p;
      if (cache) cache->p[static_cast<std::size_t>(b * sh.heads + h)] = p;
    }
  }
  Mat<S> h1 = x + ((P.m(s.wo) * o).colwise() + P.v(s.bo));
  const Mat<S> bn = layer_norm<S>(h1, P.v(s.ln2_g), P.v(s.ln2_b), cache ? &ln2 : nullptr);
  Mat<S> f = (P.m(s.w1) * bn).colwise() + P.v(s.b1);
  Mat<S> out = h1 + ((P.m(s.w2) * f.cwiseMax(S(0))).colwise() + P.v(s.b2));
  if (cache) {
    cache->in = x;
    cache->a = a;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->o = std::move(o);
    cache->h1 = std::move(h1);
    cache->b = bn;
    cache->f = std::move(f);
    cache->ln1 = std::move(ln1);
    cache->ln2 = std::move(ln2);
  }
  return out;
}

template <class S>
Mat<S> block_backward(const ConstParams<S>& P, const Params<S>& G, const BlockSlots& s, const BlockCache<S>& c,
                      const Mat<S>& dout, const Shape& sh) {
  const Eigen::Index d = dout.rows(), T = sh.frames, dh = d / sh.heads;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  // Feed-forward branch.
  const Mat<S> r = c.f.cwiseMax(S(0));
  G.m(s.w2).noalias() += dout * r.transpose();
  G.v(s.b2) += dout.rowwise().sum();
  Mat<S> df = P.m(s.w2).transpose() * dout;
  df.array() *= (c.f.array() > S(0)).template cast<S>();
  G.m(s.w1).noalias() += df * c.b.transpose();
  G.v(s.b1) += df.rowwise().sum();
  const Mat<S> dbn = P.m(s.w1).transpose() * df;
  Mat<S> dh1 = dout + layer_norm_backward<S>(dbn, P.v(s.ln2_g), c.ln2, G.v(s.ln2_g), G.v(s.ln2_b));

  // Attention branch.
  G.m(s.wo).noalias() += dh1 * c.o.transpose();
  G.v(s.bo) += dh1.rowwise().sum();
  const Mat<S> dout_attn = P.m(s.wo).transpose() * dh1;
  Mat<S> dq(d, dout.cols()), dk(d, dout.cols()), dv(d, dout.cols());
  Mat<S> dp, ds;
  for (Eigen::Index b = 0; b < sh.batch; ++b) {
    for (Eigen::Index h = 0; h < sh.heads; ++h) {
      const Mat<S>& p = c.p[static_cast<std::size_t>(b * sh.heads + h)];
      const auto doh = dout_attn.block(h * dh, b * T, dh, T);
      dv.block(h * dh, b * T, dh, T).noalias() = doh * p.transpose();
      dp.noalias() = c.v.block(h * dh, b * T, dh, T).transpose() * doh;
      const RowVec<S> inner = (p.array() * dp.array()).colwise().sum();
      ds = (p.array() * (dp.array().rowwise() - inner.array())).matrix() * scale;
      dq.block(h * dh, b * T, dh, T).noalias() = c.k.block(h * dh, b * T, dh, T) * ds;
      dk.block(h * dh, b * T, dh, T).noalias() = c.q.block(h * dh, b * T, dh, T) * ds.transpose();
    }
  }
  G.m(s.wq).noalias() += dq * c.a.transpose();
  G.m(s.wk).noalias() += dk * c.a.transpose();
  G.m(s.wv).noalias() += dv * c.a.transpose();
  G.v(s.bq) += dq.rowwise().sum();
  G.v(s.bk) += dk.rowwise().sum();
  G.v(s.bv) += dv.rowwise().sum();
  Mat<S> da = P.m(s.wq).transpose() * dq;
  da.noalias() += P.m(s.wk).transpose() * dk;
  da.noalias() += P.m(s.wv).transpose() * dv;
  return dh1 + layer_norm_backward<S>(da, P.v(s.ln1_g), c.ln1, G.v(s.ln1_g), G.v(s.ln1_b));
}

template <class S>
Mat<S> to_batch(std::span<const Eigen::MatrixXd> xs, Eigen::Index coords, Eigen::Index frames) {
  Mat<S> x(coords, static_cast<Eigen::Index>(xs.size()) * frames);
  for (std::size_t b = 0; b < xs.size(); ++b) {
    require(xs[b].rows() == coords && xs[b].cols() == frames,
            "input must be " + std::to_string(coords) + " x " + std::to_string(frames) + ", got " +
                std::to_string(xs[b].rows()) + " x " + std::to_string(xs[b].cols()));
    x.middleCols(static_cast<Eigen::Index>(b) * frames, frames) = xs[b].cast<S>();
  }
  return x;
}

}  // namespace

template <class S>
TransformerVAE<S>::TransformerVAE(const VAEConfig& config) : config_(config), layout_(std::make_unique<Layout>()) {
  config_.validate();
  const Eigen::Index d = config_.model_dim, dz = config_.latent_dim, ff = config_.ff_dim, C = config_.coords();
  SlotAllocator alloc;
  Layout& L = *layout_;
  L.in_w = alloc(d, C);
  L.in_b = alloc(d);
  for (int i = 0; i < config_.encoder_layers; ++i) L.enc.push_back(make_block(alloc, d, ff));
  L.enc_g = alloc(d);
  L.enc_b = alloc(d);
  L.mu_w = alloc(dz, d);
  L.mu_b = alloc(dz);
  L.lv_w = alloc(dz, d);
  L.lv_b = alloc(dz);
  L.z_w = alloc(d, dz);
  L.z_b = alloc(d);
  for (int i = 0; i < config_.decoder_layers; ++i) L.dec.push_back(make_block(alloc, d, ff));
  L.dec_g = alloc(d);
  L.dec_b = alloc(d);
  L.out_w = alloc(C, d);
  L.out_b = alloc(C);
  L.total = alloc.total;
  L.pe = positional_encoding<S>(d, config_.frames);

  params_.assign(L.total, S(0));
  Params<S> P{params_.data()};
  std::mt19937_64 rng(config_.seed);
  auto init_weight = [&](const Slot& s) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(s.cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto m = P.m(s);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<S>(u(rng));
  };
  auto init_block = [&](const BlockSlots& b) {
    P.v(b.ln1_g).setOnes();
    P.v(b.ln2_g).setOnes();
    for (const Slot* w : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.w2}) init_weight(*w);
  };
  init_weight(L.in_w);
  for (const auto& b : L.enc) init_block(b);
  P.v(L.enc_g).setOnes();
  init_weight(L.mu_w);
  init_weight(L.lv_w);
  init_weight(L.z_w);
  for (const auto& b : L.dec) init_block(b);
  P.v(L.dec_g).setOnes();
  init_weight(L.out_w);
}

template <class S>
TransformerVAE<S>::~TransformerVAE() = default;
template <class S>
TransformerVAE<S>::TransformerVAE(const TransformerVAE& o)
    : config_(o.config_), params_(o.params_), layout_(std::make_unique<Layout>(*o.layout_)) {}
template <class S>
TransformerVAE<S>& TransformerVAE<S>::operator=(const TransformerVAE& o) {
  if (this != &o) {
    config_ = o.config_;
    params_ = o.params_;
    layout_ = std::make_unique<Layout>(*o.layout_);
  }
  return *this;
}
template <class S>
TransformerVAE<S>::TransformerVAE(TransformerVAE&&) noexcept = default;
template <class S>
TransformerVAE<S>& TransformerVAE<S>::operator=(TransformerVAE&&) noexcept = default;

namespace {

template <class S>
struct EncoderOut {
  Mat<S> mu, lv_raw, lv, pooled;
  LayerNormCache<S> ln;
  std::vector<BlockCache<S>> blocks;
};

template <class S, class Layout>
EncoderOut<S> run_encoder(const Layout& L, const ConstParams<S>& P, const Mat<S>& x, const Shape& sh, bool keep) {
  EncoderOut<S> out;
  Mat<S> h = (P.m(L.in_w) * x).colwise() + P.v(L.in_b);
  for (Eigen::Index b = 0; b < sh.batch; ++b) h.middleCols(b * sh.frames, sh.frames) += L.pe;
  if (keep) out.blocks.resize(L.enc.size());
  for (std::size_t i = 0; i < L.enc.size(); ++i) h = block_forward<S>(P, L.enc[i], h, sh, keep ? &out.blocks[i] : nullptr);
  const Mat<S> e = layer_norm<S>(h, P.v(L.enc_g), P.v(L.enc_b), keep ? &out.ln : nullptr);
  out.pooled.resize(e.rows(), sh.batch);
  for (Eigen::Index b = 0; b < sh.batch; ++b) out.pooled.col(b) = e.middleCols(b * sh.frames, sh.frames).rowwise().mean();
  out.mu = (P.m(L.mu_w) * out.pooled).colwise() + P.v(L.mu_b);
  out.lv_raw = (P.m(L.lv_w) * out.pooled).colwise() + P.v(L.lv_b);
  out.lv = out.lv_raw.cwiseMax(static_cast<S>(kLogVarianceMin)).cwiseMin(static_cast<S>(kLogVarianceMax));
  return out;
}

template <class S>
struct DecoderOut {
  Mat<S> y, dn;
  LayerNormCache<S> ln;
  std::vector<BlockCache<S>> blocks;
};

template <class S, class Layout>
DecoderOut<S> run_decoder(const Layout& L, const ConstParams<S>& P, const Mat<S>& z, const Shape& sh, bool keep) {
  DecoderOut<S> out;
  const Mat<S> g = (P.m(L.z_w) * z).colwise() + P.v(L.z_b);
  Mat<S> h(g.rows(), sh.batch * sh.frames);
  for (Eigen::Index b = 0; b < sh.batch; ++b) h.middleCols(b * sh.frames, sh.frames) = L.pe.colwise() + g.col(b);
  if (keep) out.blocks.resize(L.dec.size());
  for (std::size_t i = 0; i < L.dec.size(); ++i) h = block_forward<S>(P, L.dec[i], h, sh, keep ? &out.blocks[i] : nullptr);
  out.dn = layer_norm<S>(h, P.v(L.dec_g), P.v(L.dec_b), keep ? &out.ln : nullptr);
  out.y = (P.m(L.out_w) * out.dn).colwise() + P.v(L.out_b);
  return out;
}

}  // namespace

// Samples run through the network one at a time. Batched products would be
// faster, but their rounding depends on the batch width, and decode(z) has to
// give the same bits whether z is decoded alone or inside a population.
template <class S>
std::vector<LatentDistribution> TransformerVAE<S>::encode_batch(std::span<const Eigen::MatrixXd> xs) const {
  const Shape sh{1, config_.frames, config_.attention_heads};
  const ConstParams<S> P{params_.data()};
  std::vector<LatentDistribution> out(xs.size());
  for (std::size_t b = 0; b < xs.size(); ++b) {
    const Mat<S> x = to_batch<S>(xs.subspan(b, 1), config_.coords(), config_.frames);
    const EncoderOut<S> e = run_encoder<S>(*layout_, P, x, sh, false);
    out[b].mean = e.mu.col(0).template cast<double>();
    out[b].log_variance = e.lv.col(0).template cast<double>();
    if (!out[b].mean.allFinite() || !out[b].log_variance.allFinite()) throw NumericalError("encoder produced non-finite latents");
  }
  return out;
}

template <class S>
LatentDistribution TransformerVAE<S>::encode(const Eigen::MatrixXd& x) const {
  return encode_batch(std::span<const Eigen::MatrixXd>(&x, 1)).front();
}

template <class S>
std::vector<Eigen::MatrixXd> TransformerVAE<S>::decode_batch(const Eigen::MatrixXd& zs) const {
  require(zs.rows() == config_.latent_dim,
          "latent vector must have length " + std::to_string(config_.latent_dim) + ", got " + std::to_string(zs.rows()));
  require(zs.allFinite(), "latent vector is not finite");
  const Shape sh{1, config_.frames, config_.attention_heads};
  const ConstParams<S> P{params_.data()};
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(zs.cols()));
  for (Eigen::Index b = 0; b < zs.cols(); ++b) {
    const Mat<S> z = zs.col(b).cast<S>();
    out[static_cast<std::size_t>(b)] = run_decoder<S>(*layout_, P, z, sh, false).y.template cast<double>();
  }
  return out;
}

template <class S>
Eigen::MatrixXd TransformerVAE<S>::decode(const LatentVector& z) const {
  return decode_batch(z).front();
}

template <class S>
LossTerms TransformerVAE<S>::loss_and_gradient(std::span<const Eigen::MatrixXd> batch, const Eigen::MatrixXd& eps,
                                               std::span<S> grad) const {
  require(!batch.empty(), "empty batch");
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  require(eps.rows() == config_.latent_dim && eps.cols() == B, "noise must be latent_dim x batch");
  const bool want_grad = !grad.empty();
  require(!want_grad || grad.size() == params_.size(), "gradient buffer has the wrong size");
  const Layout& L = *layout_;
  const Shape sh{B, config_.frames, config_.attention_heads};
  const ConstParams<S> P{params_.data()};
  const Mat<S> x = to_batch<S>(batch, config_.coords(), config_.frames);

  EncoderOut<S> enc = run_encoder<S>(L, P, x, sh, want_grad);
  const Mat<S> e = eps.cast<S>();
  const Mat<S> sigma = (enc.lv.array() * S(0.5)).exp().matrix();
  const Mat<S> z = enc.mu + (sigma.array() * e.array()).matrix();
  DecoderOut<S> dec = run_decoder<S>(L, P, z, sh, want_grad);

  Mat<S> dy, dmu, dlv;
  const LossTerms terms = loss_terms<S>(x, dec.y, enc.mu, enc.lv, B, config_.frames, config_.joints, config_,
                                        want_grad ? &dy : nullptr, want_grad ? &dmu : nullptr,
                                        want_grad ? &dlv : nullptr);
  if (!want_grad) return terms;

  AlignedBuffer<S> work(params_.size(), S(0));
  const Params<S> G{work.data()};
  G.m(L.out_w).noalias() += dy * dec.dn.transpose();
  G.v(L.out_b) += dy.rowwise().sum();
  Mat<S> dh = layer_norm_backward<S>(P.m(L.out_w).transpose() * dy, P.v(L.dec_g), dec.ln, G.v(L.dec_g), G.v(L.dec_b));
  for (std::size_t i = L.dec.size(); i-- > 0;) dh = block_backward<S>(P, G, L.dec[i], dec.blocks[i], dh, sh);
  Mat<S> dg(dh.rows(), B);
  for (Eigen::Index b = 0; b < B; ++b) dg.col(b) = dh.middleCols(b * sh.frames, sh.frames).rowwise().sum();
  G.m(L.z_w).noalias() += dg * z.transpose();
  G.v(L.z_b) += dg.rowwise().sum();
  const Mat<S> dz = P.m(L.z_w).transpose() * dg;

  dmu += dz;
  dlv += (dz.array() * e.array() * sigma.array() * S(0.5)).matrix();
  // The clamp passes gradient only strictly inside its range.
  dlv.array() *= ((enc.lv_raw.array() > static_cast<S>(kLogVarianceMin)) &&
                  (enc.lv_raw.array() < static_cast<S>(kLogVarianceMax)))
                     .template cast<S>();
  G.m(L.mu_w).noalias() += dmu * enc.pooled.transpose();
  G.v(L.mu_b) += dmu.rowwise().sum();
  G.m(L.lv_w).noalias() += dlv * enc.pooled.transpose();
  G.v(L.lv_b) += dlv.rowwise().sum();
  Mat<S> dpooled = P.m(L.mu_w).transpose() * dmu;
  dpooled.noalias() += P.m(L.lv_w).transpose() * dlv;
  Mat<S> de(dpooled.rows(), B * sh.frames);
  for (Eigen::Index b = 0; b < B; ++b) {
    de.middleCols(b * sh.frames, sh.frames) = (dpooled.col(b) / static_cast<S>(sh.frames)).replicate(1, sh.frames);
  }
  dh = layer_norm_backward<S>(de, P.v(L.enc_g), enc.ln, G.v(L.enc_g), G.v(L.enc_b));
  for (std::size_t i = L.enc.size(); i-- > 0;) dh = block_backward<S>(P, G, L.enc[i], enc.blocks[i], dh, sh);
  G.m(L.in_w).noalias() += dh * x.transpose();
  G.v(L.in_b) += dh.rowwise().sum();
  std::copy(work.begin(), work.end(), grad.begin());
  return terms;
}

template class TransformerVAE<float>;
template class TransformerVAE<double>;

std::vector<double> reconstruction_rmse_mm(const VAE& model, std::span<const Eigen::MatrixXd> corpus,
                                           const Scaler& scaler) {
  const int joints = model.config().joints;
  std::vector<double> sq(static_cast<std::size_t>(joints), 0.0);
  std::size_t count = 0;
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < corpus.size(); start += kChunk) {
    const auto chunk = corpus.subspan(start, std::min(kChunk, corpus.size() - start));
    const auto dists = model.encode_batch(chunk);
    Eigen::MatrixXd zs(model.config().latent_dim, static_cast<Eigen::Index>(chunk.size()));
    for (std::size_t i = 0; i < chunk.size(); ++i) zs.col(static_cast<Eigen::Index>(i)) = dists[i].mean;
    const auto recon = model.decode_batch(zs);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const Eigen::MatrixXd x = destandardize(chunk[i], scaler);
      const Eigen::MatrixXd y = destandardize(recon[i], scaler);
      for (int j = 0; j < joints; ++j) sq[static_cast<std::size_t>(j)] += (y.middleRows(3 * j, 3) - x.middleRows(3 * j, 3)).squaredNorm();
      count += static_cast<std::size_t>(x.cols());
    }
  }
  std::vector<double> rmse(sq.size());
  for (std::size_t j = 0; j < sq.size(); ++j) rmse[j] = std::sqrt(sq[j] / static_cast<double>(count));
  return rmse;
}

std::pair<VAE, TrainReport> train(std::span<const Eigen::MatrixXd> corpus, const Scaler& scaler,
                                  const VAEConfig& config, const TrainOptions& options) {
  config.validate();
  require(!corpus.empty(), "training corpus is empty");
  const auto t0 = std::chrono::steady_clock::now();
  VAE model(config);
  if (options.initial) {
    const VAEConfig& ic = options.initial->config();
    require(ic.model_dim == config.model_dim && ic.latent_dim == config.latent_dim &&
                ic.encoder_layers == config.encoder_layers && ic.decoder_layers == config.decoder_layers &&
                ic.attention_heads == config.attention_heads && ic.ff_dim == config.ff_dim &&
                ic.frames == config.frames && ic.joints == config.joints,
            "warm-start model architecture does not match the training config");
    std::ranges::copy(options.initial->parameters(), model.parameters().begin());
  }
  TrainReport report;
  report.config = config;

  using S = float;
  const std::size_t n = corpus.size();
  const std::size_t np = model.parameter_count();
  AlignedBuffer<S> grad(np), m(np, S(0)), v(np, S(0));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed ^ 0x7f4a7c159e3779b9ULL);
  std::normal_distribution<double> n01;
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  long step = 0;
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::vector<Eigen::MatrixXd> batch;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    LossTerms acc;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t len = std::min(bs, n - start);
      batch.clear();
      for (std::size_t i = 0; i < len; ++i) batch.push_back(corpus[order[start + i]]);
      Eigen::MatrixXd eps(config.latent_dim, static_cast<Eigen::Index>(len));
      for (Eigen::Index c = 0; c < eps.cols(); ++c)
        for (Eigen::Index r = 0; r < eps.rows(); ++r) eps(r, c) = n01(rng);
      const LossTerms t = model.loss_and_gradient(batch, eps, grad);
      if (!std::isfinite(t.total)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch starting at " +
                             std::to_string(start) + " (recon " + std::to_string(t.recon) + ", kl " +
                             std::to_string(t.kl) + ", speed " + std::to_string(t.speed) + ")");
      }
      const double w = static_cast<double>(len) / static_cast<double>(n);
      acc.recon += w * t.recon;
      acc.kl += w * t.kl;
      acc.speed += w * t.speed;
      acc.total += w * t.total;

      ++step;
      const double c1 = 1.0 / (1.0 - std::pow(b1, static_cast<double>(step)));
      const double c2 = 1.0 / (1.0 - std::pow(b2, static_cast<double>(step)));
      const auto lr = static_cast<S>(config.learning_rate);
      auto params = model.parameters();
      for (std::size_t i = 0; i < np; ++i) {
        const S g = grad[i];
        m[i] = static_cast<S>(b1) * m[i] + static_cast<S>(1 - b1) * g;
        v[i] = static_cast<S>(b2) * v[i] + static_cast<S>(1 - b2) * g * g;
        const S mhat = m[i] * static_cast<S>(c1);
        const S vhat = v[i] * static_cast<S>(c2);
        params[i] -= lr * mhat / (std::sqrt(vhat) + static_cast<S>(adam_eps));
      }
    }
    report.recon.push_back(acc.recon);
    report.kl.push_back(acc.kl);
    report.speed.push_back(acc.speed);
    report.total.push_back(acc.total);
    if (options.on_epoch && !options.on_epoch(epoch, acc)) break;
  }
  if (config.coords() == static_cast<int>(kCoordsPerFrame)) {
    report.joint_rmse_mm = reconstruction_rmse_mm(model, corpus, scaler);
    report.rmse_mm = std::accumulate(report.joint_rmse_mm.begin(), report.joint_rmse_mm.end(), 0.0) /
                     static_cast<double>(report.joint_rmse_mm.size());
  }
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(report)};
}

}  // namespace pmgf
