#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "orthotune/config.hpp"
#include "orthotune/dcrc.hpp"
#include "orthotune/rng.hpp"

namespace orthotune {

namespace detail {

inline Eigen::MatrixXd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                       double scale) {
  Eigen::MatrixXd m(rows, cols);
  // Canonical fill order: row-major, so the stream layout is stable.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.gaussian();
  return m;
}

inline void clip_column_norms(Eigen::MatrixXd& m, double lo, double hi) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double n = m.col(j).norm();
    if (n == 0.0)
      m.col(j) = lo * Eigen::VectorXd::Unit(m.rows(), j % m.rows());
    else if (n < lo)
      m.col(j) *= lo / n;
    else if (n > hi)
      m.col(j) *= hi / n;
  }
}

}  // namespace detail

/// Frozen dual-tower weights: L square matrices per tower plus a projection
/// to the shared embedding dimension. Immutable after construction; the
/// same (config, seed) pair reproduces the stack bit-for-bit.
class PretrainedStack {
 public:
  static PretrainedStack make(const RunConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    PretrainedStack s;
    s.seed_ = seed;
    Rng rng(detail::mix_seed(seed, 0x70726574));  // stack stream
    const auto de = static_cast<Eigen::Index>(cfg.d_e);
    const auto dv = static_cast<Eigen::Index>(cfg.d_v);
    const auto ds = static_cast<Eigen::Index>(cfg.d_s);
    for (std::size_t l = 0; l < cfg.L; ++l) {
      Eigen::MatrixXd wt = detail::gaussian_matrix(rng, de, de, 1.0 / std::sqrt(double(cfg.d_e)));
      Eigen::MatrixXd wi = detail::gaussian_matrix(rng, dv, dv, 1.0 / std::sqrt(double(cfg.d_v)));
      detail::clip_column_norms(wt, 1e-3, 1e3);
      detail::clip_column_norms(wi, 1e-3, 1e3);
      s.text_layers_.push_back(std::move(wt));
      s.image_layers_.push_back(std::move(wi));
    }
    s.text_proj_ = detail::gaussian_matrix(rng, ds, de, 1.0 / std::sqrt(double(cfg.d_e)));
    s.image_proj_ = detail::gaussian_matrix(rng, ds, dv, 1.0 / std::sqrt(double(cfg.d_v)));
    return s;
  }

  std::size_t layer_count() const { return text_layers_.size(); }
  std::uint64_t seed() const { return seed_; }

  const Eigen::MatrixXd& layer(Modality m, std::size_t l) const {
    const auto& v = m == Modality::text ? text_layers_ : image_layers_;
    detail::require(l < v.size(), "stack: layer index out of range");
    return v[l];
  }

  const Eigen::MatrixXd& projection(Modality m) const {
    return m == Modality::text ? text_proj_ : image_proj_;
  }

  bool equals(const PretrainedStack& other) const {
    if (layer_count() != other.layer_count()) return false;
    for (std::size_t l = 0; l < layer_count(); ++l) {
      if (text_layers_[l] != other.text_layers_[l]) return false;
      if (image_layers_[l] != other.image_layers_[l]) return false;
    }
    return text_proj_ == other.text_proj_ && image_proj_ == other.image_proj_;
  }

 private:
  PretrainedStack() = default;
  std::vector<Eigen::MatrixXd> text_layers_;   // d_e x d_e each
  std::vector<Eigen::MatrixXd> image_layers_;  // d_v x d_v each
  Eigen::MatrixXd text_proj_;                  // d_s x d_e
  Eigen::MatrixXd image_proj_;                 // d_s x d_v
  std::uint64_t seed_ = 0;
};

/// Index-aligned synthetic pairs; samples are columns. Both views are linear
/// images of a shared latent plus isotropic noise, so cross-modal structure
/// is learnable by construction.
struct SynthBatch {
  Eigen::MatrixXd x_image;  // d_v x n
  Eigen::MatrixXd x_text;   // d_e x n
  std::uint64_t seed = 0;
  std::string pairing_rule = "shared-latent-linear-v1";

  std::size_t size() const { return static_cast<std::size_t>(x_image.cols()); }
};

/// The fixed per-seed mixing maps behind synth_pairs, exposed so diagnostics
/// can recover latent coordinates.
struct SynthMixing {
  Eigen::MatrixXd a_image;  // d_v x d_s
  Eigen::MatrixXd a_text;   // d_e x d_s
};

inline SynthMixing synth_mixing_maps(const RunConfig& cfg, std::uint64_t seed) {
  Rng rng(detail::mix_seed(seed, 0x6d6978));  // mixing stream
  SynthMixing mix;
  const auto ds = static_cast<Eigen::Index>(cfg.d_s);
  mix.a_image = detail::gaussian_matrix(rng, static_cast<Eigen::Index>(cfg.d_v), ds,
                                        1.0 / std::sqrt(double(cfg.d_s)));
  mix.a_text = detail::gaussian_matrix(rng, static_cast<Eigen::Index>(cfg.d_e), ds,
                                       1.0 / std::sqrt(double(cfg.d_s)));
  return mix;
}

inline SynthBatch synth_pairs(const RunConfig& cfg, std::uint64_t seed, std::size_t n) {
  detail::require(n >= 2, "synth_pairs: need at least 2 pairs");
  const SynthMixing mix = synth_mixing_maps(cfg, seed);
  Rng rng(detail::mix_seed(seed, 0x64617461));  // sample stream
  SynthBatch b;
  b.seed = seed;
  const auto ds = static_cast<Eigen::Index>(cfg.d_s);
  Eigen::MatrixXd z = detail::gaussian_matrix(rng, ds, static_cast<Eigen::Index>(n), 1.0);
  Eigen::MatrixXd noise_v = detail::gaussian_matrix(
      rng, static_cast<Eigen::Index>(cfg.d_v), static_cast<Eigen::Index>(n), cfg.noise_scale);
  Eigen::MatrixXd noise_e = detail::gaussian_matrix(
      rng, static_cast<Eigen::Index>(cfg.d_e), static_cast<Eigen::Index>(n), cfg.noise_scale);
  b.x_image = mix.a_image * z + noise_v;
  b.x_text = mix.a_text * z + noise_e;
  return b;
}

/// Intermediates of one tower forward pass, kept for reverse accumulation.
struct TowerCache {
  std::vector<Eigen::MatrixXd> acts;  // M_0 = input .. M_L (post-activation), d x n
  Eigen::MatrixXd u;                  // d_s x n, pre-normalization
  Eigen::VectorXd norms;              // per-sample embedding norms
  Eigen::MatrixXd e_cols;             // d_s x n, unit columns
};

/// Tower forward map: M_{l+1} = tanh(W'_l M_l) for hidden layers, identity
/// at the last layer, then the frozen projection; outputs are L2-normalized
/// per sample. Bias-free towers map zero inputs to zero pre-normalization,
/// so a zero embedding is a hard error rather than a silent NaN.
inline TowerCache forward_tower_cached(const PretrainedStack& stack,
                                       const std::vector<Eigen::MatrixXd>& adjusted_weights,
                                       const Eigen::MatrixXd& x, Modality modality) {
  const std::size_t layers = stack.layer_count();
  detail::require(adjusted_weights.size() == layers,
                  "forward_tower: need one adjusted weight per layer");
  TowerCache c;
  c.acts.reserve(layers + 1);
  c.acts.push_back(x);
  for (std::size_t l = 0; l < layers; ++l) {
    detail::require(adjusted_weights[l].cols() == c.acts.back().rows(),
                    "forward_tower: weight/input shape mismatch");
    Eigen::MatrixXd m = adjusted_weights[l] * c.acts.back();
    if (l + 1 < layers) m = m.array().tanh().matrix();
    c.acts.push_back(std::move(m));
  }
  c.u = stack.projection(modality) * c.acts.back();  // d_s x n
  c.norms.resize(c.u.cols());
  c.e_cols.resize(c.u.rows(), c.u.cols());
  for (Eigen::Index j = 0; j < c.u.cols(); ++j) {
    const double norm = c.u.col(j).norm();
    detail::require(norm > 0.0, "forward_tower: zero embedding cannot be normalized");
    c.norms[j] = norm;
    c.e_cols.col(j) = c.u.col(j) / norm;
  }
  return c;
}

/// Embeddings only, samples as rows (n x d_s).
inline Eigen::MatrixXd forward_tower(const PretrainedStack& stack,
                                     const std::vector<Eigen::MatrixXd>& adjusted_weights,
                                     const Eigen::MatrixXd& x, Modality modality) {
  return forward_tower_cached(stack, adjusted_weights, x, modality).e_cols.transpose();
}

/// Unadapted forward: the pretrained weights verbatim.
inline Eigen::MatrixXd forward_tower_pretrained(const PretrainedStack& stack,
                                                const Eigen::MatrixXd& x, Modality modality) {
  std::vector<Eigen::MatrixXd> w;
  for (std::size_t l = 0; l < stack.layer_count(); ++l) w.push_back(stack.layer(modality, l));
  return forward_tower(stack, w, x, modality);
}

/// Symmetric contrastive alignment loss: mean of row-wise and column-wise
/// cross-entropy over the scaled similarity matrix, matched indices as
/// targets. Embeddings are n x d_s with samples as rows.
inline double alignment_loss(const Eigen::MatrixXd& emb_v, const Eigen::MatrixXd& emb_e,
                             double tau) {
  detail::require(tau > 0.0, "alignment_loss: temperature must be positive");
  detail::require(emb_v.rows() == emb_e.rows() && emb_v.cols() == emb_e.cols(),
                  "alignment_loss: embedding shape mismatch");
  const Eigen::Index n = emb_v.rows();
  detail::require(n >= 2, "alignment_loss: need at least 2 pairs");

  const Eigen::MatrixXd z = emb_v * emb_e.transpose() / tau;
  auto cross_entropy = [n](const Eigen::MatrixXd& logits) {
    // Row-wise CE with the diagonal as target, max-stabilized.
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double mx = logits.row(i).maxCoeff();
      double sum = 0.0;
      for (Eigen::Index k = 0; k < logits.cols(); ++k) sum += std::exp(logits(i, k) - mx);
      total += std::log(sum) + mx - logits(i, i);
    }
    return total / static_cast<double>(n);
  };
  return 0.5 * (cross_entropy(z) + cross_entropy(z.transpose()));
}

}  // namespace orthotune
