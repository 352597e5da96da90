#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "orthotune/config.hpp"
#include "orthotune/dcrc.hpp"
#include "orthotune/ortho.hpp"
#include "orthotune/rng.hpp"

namespace orthotune {

/// All trainable quantities. The flat-vector layout is normative (it defines
/// the checkpoint format and the finite-difference coordinate order):
///
///   1. text skew uppers, layer-major then block, each row-major (i < j)
///   2. image general blocks, layer-major then block, each row-major
///   3. f3 weights in depth order, each row-major (linear variant: S3)
///   4. f4 weights in depth order, each row-major (linear variant: S4)
///   5. alpha, row-major ((b_v+b_e) x L)
struct AdapterState {
  std::size_t q = 0;
  std::size_t layers = 0;
  std::size_t b_v = 0;
  std::size_t b_e = 0;
  std::vector<std::vector<SkewParam>> text;           // [L][b_e]
  std::vector<std::vector<GeneralBlockParam>> image;  // [L][b_v]
  RelationMaps maps;
  Eigen::MatrixXd alpha;  // (b_v+b_e) x L

  std::size_t slice_count() const { return b_v + b_e; }

  /// Identity-at-init construction: zero block parameters, relation maps at
  /// identity plus small seeded noise (scale 1e-3), gate at alpha_init.
  static AdapterState init(const RunConfig& cfg) {
    cfg.validate();
    AdapterState s;
    s.q = cfg.q;
    s.layers = cfg.L;
    s.b_v = cfg.blocks_image();
    s.b_e = cfg.blocks_text();
    for (std::size_t l = 0; l < cfg.L; ++l) {
      std::vector<SkewParam> trow;
      for (std::size_t i = 0; i < s.b_e; ++i) trow.push_back(SkewParam::zeros(cfg.q));
      s.text.push_back(std::move(trow));
      std::vector<GeneralBlockParam> irow;
      for (std::size_t i = 0; i < s.b_v; ++i) irow.push_back(GeneralBlockParam::zeros(cfg.q));
      s.image.push_back(std::move(irow));
    }

    Rng rng(detail::mix_seed(cfg.seed, 0x61646170));  // adapter-init stream
    const std::size_t depth = cfg.relation_variant == RelationVariant::linear ? 1 : cfg.k;
    const auto slices = static_cast<Eigen::Index>(s.slice_count());
    const auto nl = static_cast<Eigen::Index>(cfg.L);
    s.maps.variant = cfg.relation_variant;
    s.maps.activation = cfg.activation;
    auto noisy_identity = [&rng](Eigen::Index n) {
      Eigen::MatrixXd w = Eigen::MatrixXd::Identity(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) w(i, j) += 1e-3 * rng.gaussian();
      return w;
    };
    for (std::size_t j = 0; j < depth; ++j) s.maps.f3_weights.push_back(noisy_identity(slices));
    for (std::size_t j = 0; j < depth; ++j) s.maps.f4_weights.push_back(noisy_identity(nl));
    s.alpha = Eigen::MatrixXd::Constant(slices, nl, cfg.alpha_init);
    return s;
  }

  std::size_t param_count() const {
    const std::size_t skew = SkewParam::param_count(q);
    std::size_t n = layers * b_e * skew + layers * b_v * q * q;
    for (const auto& w : maps.f3_weights) n += static_cast<std::size_t>(w.size());
    for (const auto& w : maps.f4_weights) n += static_cast<std::size_t>(w.size());
    n += static_cast<std::size_t>(alpha.size());
    return n;
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(param_count()));
    Eigen::Index t = 0;
    for (const auto& row : text)
      for (const auto& p : row)
        for (Eigen::Index i = 0; i < p.upper.size(); ++i) out[t++] = p.upper[i];
    for (const auto& row : image)
      for (const auto& p : row)
        for (Eigen::Index i = 0; i < p.g.rows(); ++i)
          for (Eigen::Index j = 0; j < p.g.cols(); ++j) out[t++] = p.g(i, j);
    for (const auto* ws : {&maps.f3_weights, &maps.f4_weights})
      for (const auto& w : *ws)
        for (Eigen::Index i = 0; i < w.rows(); ++i)
          for (Eigen::Index j = 0; j < w.cols(); ++j) out[t++] = w(i, j);
    for (Eigen::Index i = 0; i < alpha.rows(); ++i)
      for (Eigen::Index j = 0; j < alpha.cols(); ++j) out[t++] = alpha(i, j);
    return out;
  }

  void unflatten(const Eigen::VectorXd& v) {
    detail::require(v.size() == static_cast<Eigen::Index>(param_count()),
                    "unflatten: vector length does not match state");
    Eigen::Index t = 0;
    for (auto& row : text)
      for (auto& p : row)
        for (Eigen::Index i = 0; i < p.upper.size(); ++i) p.upper[i] = v[t++];
    for (auto& row : image)
      for (auto& p : row)
        for (Eigen::Index i = 0; i < p.g.rows(); ++i)
          for (Eigen::Index j = 0; j < p.g.cols(); ++j) p.g(i, j) = v[t++];
    for (auto* ws : {&maps.f3_weights, &maps.f4_weights})
      for (auto& w : *ws)
        for (Eigen::Index i = 0; i < w.rows(); ++i)
          for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = v[t++];
    for (Eigen::Index i = 0; i < alpha.rows(); ++i)
      for (Eigen::Index j = 0; j < alpha.cols(); ++j) alpha(i, j) = v[t++];
  }
};

/// Closed-form parameter accounting for an architecture config.
struct ParamCountReport {
  std::int64_t text_skew = 0;
  std::int64_t image_general = 0;
  std::int64_t relation_maps = 0;
  std::int64_t alpha = 0;
  std::int64_t trainable = 0;
  std::int64_t frozen = 0;
  double ratio = 0.0;
};

inline ParamCountReport count_parameters(const RunConfig& cfg) {
  cfg.validate();
  const PopCounts pop = pop_param_counts(cfg.d_v, cfg.d_e, cfg.q, cfg.L, cfg.m);
  const RelationCounts rel =
      relation_param_counts(cfg.slice_count(), cfg.L, cfg.k, cfg.relation_variant);
  ParamCountReport r;
  r.text_skew = pop.text_skew;
  r.image_general = pop.image_general;
  r.relation_maps = rel.relation_maps;
  r.alpha = rel.alpha;
  r.trainable = r.text_skew + r.image_general + r.relation_maps + r.alpha;
  // Frozen entries of the matrices the adapters act on, plus projections.
  r.frozen = static_cast<std::int64_t>(cfg.L * cfg.m * (cfg.d_v * cfg.d_v + cfg.d_e * cfg.d_e) +
                                       cfg.d_s * (cfg.d_v + cfg.d_e));
  r.ratio = static_cast<double>(r.trainable) / static_cast<double>(r.frozen);
  return r;
}

}  // namespace orthotune
