#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "orthotune/ortho.hpp"
#include "orthotune/tensor.hpp"

namespace orthotune {

/// Relation-tensor mode roles: mode 2 indexes the interleaved (modality,
/// block) slices, mode 3 indexes layers.
inline constexpr std::size_t kModalityMode = 2;
inline constexpr std::size_t kLayerMode = 3;

/// Provenance of one frontal slice of the relation tensor.
struct SliceTag {
  Modality modality = Modality::text;
  std::size_t block = 0;
  std::size_t layer = 0;

  friend bool operator==(const SliceTag&, const SliceTag&) = default;
};

/// Slice order within a layer: rounds over the block index with the vision
/// block first, [v0, e0, v1, e1, ...]. When the towers have different block
/// counts the shared rounds interleave and the surplus tower's remaining
/// blocks follow in index order.
inline std::vector<SliceTag> interleave_pattern(std::size_t b_v, std::size_t b_e,
                                                std::size_t layer = 0) {
  detail::require(b_v >= 1 && b_e >= 1, "interleave_pattern: block counts must be >= 1");
  std::vector<SliceTag> tags;
  tags.reserve(b_v + b_e);
  for (std::size_t i = 0; i < std::max(b_v, b_e); ++i) {
    if (i < b_v) tags.push_back({Modality::image, i, layer});
    if (i < b_e) tags.push_back({Modality::text, i, layer});
  }
  return tags;
}

/// 3-order slice stack for one layer, (q, q, b_v + b_e), with provenance.
struct LayerTensor {
  TensorP t;
  std::vector<SliceTag> tags;
};

/// 4-order relation tensor over all blocks, (q, q, b_v + b_e, L).
/// Face k of the underlying tensor corresponds to slice i = k % (b_v + b_e)
/// of layer l = k / (b_v + b_e), and tags[k] records its provenance.
struct RelationTensor {
  TensorP t;
  std::vector<SliceTag> tags;

  std::size_t block_extent() const { return t.dim(0); }
  std::size_t slice_count() const { return t.dim(kModalityMode); }
  std::size_t layer_count() const { return t.dim(kLayerMode); }

  const SliceTag& tag(std::size_t slice, std::size_t layer) const {
    return tags.at(layer * slice_count() + slice);
  }
};

/// Stacks one layer's realized blocks into the 3-order slice tensor.
inline LayerTensor assemble_layer_tensor(const std::vector<Eigen::MatrixXd>& text_blocks,
                                         const std::vector<Eigen::MatrixXd>& image_blocks,
                                         std::size_t layer) {
  detail::require(!text_blocks.empty() && !image_blocks.empty(),
                  "assemble_layer_tensor: both towers need at least one block");
  const Eigen::Index q = text_blocks.front().rows();
  for (const auto* blocks : {&text_blocks, &image_blocks})
    for (const auto& b : *blocks)
      detail::require(b.rows() == q && b.cols() == q,
                      "assemble_layer_tensor: blocks must share a square extent");

  LayerTensor out;
  out.tags = interleave_pattern(image_blocks.size(), text_blocks.size(), layer);
  out.t = TensorP({static_cast<std::size_t>(q), static_cast<std::size_t>(q), out.tags.size()});
  for (std::size_t i = 0; i < out.tags.size(); ++i) {
    const auto& tag = out.tags[i];
    const auto& src = tag.modality == Modality::image ? image_blocks : text_blocks;
    out.t.set_frontal_slice(i, src[tag.block]);
  }
  return out;
}

/// Stacks per-layer tensors along mode 3, in layer order.
inline RelationTensor assemble_relation_tensor(const std::vector<LayerTensor>& layers) {
  detail::require(!layers.empty(), "assemble_relation_tensor: need at least one layer");
  const auto& first = layers.front().t;
  for (const auto& lt : layers)
    detail::require(lt.t.same_dims(first), "assemble_relation_tensor: layer dim mismatch");

  RelationTensor out;
  out.t = TensorP({first.dim(0), first.dim(1), first.dim(2), layers.size()});
  out.tags.reserve(first.dim(2) * layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t i = 0; i < first.dim(2); ++i) {
      out.t.set_frontal_slice(l * first.dim(2) + i, layers[l].t.frontal_slice(i));
      SliceTag tag = layers[l].tags[i];
      tag.layer = l;
      out.tags.push_back(tag);
    }
  }
  return out;
}

/// Extracts one tower's blocks for one layer, in block-index order.
inline std::vector<Eigen::MatrixXd> blocks_for(const RelationTensor& rt, Modality modality,
                                               std::size_t layer) {
  detail::require(layer < rt.layer_count(), "blocks_for: layer out of range");
  std::vector<Eigen::MatrixXd> blocks;
  for (std::size_t i = 0; i < rt.slice_count(); ++i) {
    if (rt.tag(i, layer).modality == modality)
      blocks.push_back(rt.t.frontal_slice(layer * rt.slice_count() + i));
  }
  detail::require(!blocks.empty(), "blocks_for: no slices tagged for modality");
  return blocks;
}

enum class RelationVariant { linear, mlp };
enum class Activation { identity, relu, tanh };

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
  }
  return x;
}

/// Derivative in terms of the pre-activation value.
inline double activate_grad(Activation a, double x) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

/// Learnable cross-modality (mode 2) and cross-layer (mode 3) relation maps.
/// The linear variant holds single matrices S3/S4 (stored as depth-1 weight
/// lists); the mlp variant holds k weight matrices per mode with the scalar
/// activation applied between maps but not after the last one.
struct RelationMaps {
  RelationVariant variant = RelationVariant::linear;
  std::vector<Eigen::MatrixXd> f3_weights;  // each (b_v+b_e) x (b_v+b_e)
  std::vector<Eigen::MatrixXd> f4_weights;  // each L x L
  Activation activation = Activation::relu;

  std::size_t depth() const { return f3_weights.size(); }

  void check_shapes(std::size_t slices, std::size_t layers) const {
    detail::require(!f3_weights.empty() && f3_weights.size() == f4_weights.size(),
                    "relation maps: depths must match and be >= 1");
    if (variant == RelationVariant::linear)
      detail::require(f3_weights.size() == 1, "linear relation maps have depth 1");
    for (const auto& w : f3_weights)
      detail::require(w.rows() == static_cast<Eigen::Index>(slices) && w.rows() == w.cols(),
                      "relation maps: cross-modality map shape mismatch");
    for (const auto& w : f4_weights)
      detail::require(w.rows() == static_cast<Eigen::Index>(layers) && w.rows() == w.cols(),
                      "relation maps: cross-layer map shape mismatch");
  }
};

/// T_w = T x_2 S3 x_3 S4 (linear relation maps); dims unchanged.
inline TensorP relation_transform(const RelationTensor& rt, const Eigen::MatrixXd& s3,
                                  const Eigen::MatrixXd& s4) {
  detail::require(s3.rows() == s3.cols() &&
                      s3.rows() == static_cast<Eigen::Index>(rt.slice_count()),
                  "relation_transform: S3 shape mismatch");
  detail::require(s4.rows() == s4.cols() &&
                      s4.rows() == static_cast<Eigen::Index>(rt.layer_count()),
                  "relation_transform: S4 shape mismatch");
  return mode_n_product(mode_n_product(rt.t, s3, kModalityMode), s4, kLayerMode);
}

inline TensorP relation_transform(const RelationTensor& rt, const RelationMaps& maps) {
  detail::require(maps.variant == RelationVariant::linear,
                  "relation_transform requires the linear variant");
  maps.check_shapes(rt.slice_count(), rt.layer_count());
  return relation_transform(rt, maps.f3_weights[0], maps.f4_weights[0]);
}

namespace detail {

inline TensorP mlp_chain(const TensorP& t, const std::vector<Eigen::MatrixXd>& weights,
                         Activation act, std::size_t mode) {
  TensorP x = mode_n_product(t, weights[0], mode);
  for (std::size_t j = 1; j < weights.size(); ++j) {
    for (auto& v : x.data()) v = activate(act, v);
    x = mode_n_product(x, weights[j], mode);
  }
  return x;
}

}  // namespace detail

/// MLP relation maps: f3 along mode 2 then f4 along mode 3. With depth 1 (or
/// identity activation and identity weights) this reduces to the linear
/// variant exactly.
inline TensorP relation_transform_mlp(const RelationTensor& rt, const RelationMaps& maps) {
  detail::require(maps.variant == RelationVariant::mlp,
                  "relation_transform_mlp requires the mlp variant");
  maps.check_shapes(rt.slice_count(), rt.layer_count());
  const TensorP f3 = detail::mlp_chain(rt.t, maps.f3_weights, maps.activation, kModalityMode);
  return detail::mlp_chain(f3, maps.f4_weights, maps.activation, kLayerMode);
}

inline TensorP relation_apply(const RelationTensor& rt, const RelationMaps& maps) {
  return maps.variant == RelationVariant::linear ? relation_transform(rt, maps)
                                                 : relation_transform_mlp(rt, maps);
}

/// Gated update T'(:,:,i,l) = T(:,:,i,l) + alpha(i,l) * T_w(:,:,i,l).
/// With alpha == 0 this is an exact bit-level no-op on T.
inline RelationTensor dcrc_update(const RelationTensor& rt, const TensorP& t_w,
                                  const Eigen::MatrixXd& alpha) {
  detail::require(rt.t.same_dims(t_w), "dcrc_update: tensor shape mismatch");
  detail::require(alpha.rows() == static_cast<Eigen::Index>(rt.slice_count()) &&
                      alpha.cols() == static_cast<Eigen::Index>(rt.layer_count()),
                  "dcrc_update: gate shape mismatch");
  detail::require(alpha.allFinite(), "dcrc_update: gate must be finite");

  RelationTensor out;
  out.tags = rt.tags;
  out.t = rt.t;
  const std::size_t face_size = rt.t.dim(0) * rt.t.dim(1);
  for (std::size_t l = 0; l < rt.layer_count(); ++l) {
    for (std::size_t i = 0; i < rt.slice_count(); ++i) {
      const double a = alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
      const std::size_t base = (l * rt.slice_count() + i) * face_size;
      for (std::size_t e = 0; e < face_size; ++e)
        out.t.data()[base + e] += a * t_w.data()[base + e];
    }
  }
  return out;
}

/// Adjusted pretrained weight W' = diag(blocks) * W for one tower and layer.
/// The slices are applied as-is; orthogonality of post-update text slices is
/// a reported diagnostic, not an enforced property.
inline Eigen::MatrixXd apply_adjustment(const RelationTensor& rt, const Eigen::MatrixXd& w,
                                        Modality modality, std::size_t layer) {
  const std::vector<Eigen::MatrixXd> blocks = blocks_for(rt, modality, layer);
  const Eigen::MatrixXd b = assemble_block_diag(blocks);
  detail::require(b.cols() == w.rows(),
                  "apply_adjustment: tower width does not match assembled blocks");
  return b * w;
}

/// Largest orthogonality residual over one tower's slices of a layer.
inline double tower_slice_residual(const RelationTensor& rt, Modality modality,
                                   std::size_t layer) {
  double worst = 0.0;
  for (const auto& b : blocks_for(rt, modality, layer))
    worst = std::max(worst, orthogonality_residual(b));
  return worst;
}

/// Trainable-parameter counts of the communication stage.
struct RelationCounts {
  std::int64_t relation_maps = 0;  // k*(b_v+b_e)^2 + k*L^2 (k = 1 for linear)
  std::int64_t alpha = 0;          // (b_v+b_e)*L
};

inline RelationCounts relation_param_counts(std::size_t slices, std::size_t layers,
                                            std::size_t depth, RelationVariant variant) {
  detail::require(depth >= 1, "relation_param_counts: depth must be >= 1");
  const std::size_t k = variant == RelationVariant::linear ? 1 : depth;
  RelationCounts c;
  c.relation_maps = static_cast<std::int64_t>(k * slices * slices + k * layers * layers);
  c.alpha = static_cast<std::int64_t>(slices * layers);
  return c;
}

}  // namespace orthotune
