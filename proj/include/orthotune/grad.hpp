#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "orthotune/adapter.hpp"
#include "orthotune/dcrc.hpp"
#include "orthotune/energy.hpp"
#include "orthotune/toy_model.hpp"

namespace orthotune {

namespace detail {

/// Gradient of a mode-n product with respect to the matrix:
/// for Y = X x_mode M, returns dL/dM given dL/dY; shapes (dy.dim(mode),
/// x.dim(mode)), contracting every other mode.
inline Eigen::MatrixXd mode_n_outer(const TensorP& dy, const TensorP& x, std::size_t mode) {
  require(dy.order() == x.order(), "mode_n_outer: order mismatch");
  for (std::size_t i = 0; i < x.order(); ++i)
    if (i != mode) require(dy.dim(i) == x.dim(i), "mode_n_outer: extent mismatch");

  const std::size_t rows = dy.dim(mode);
  const std::size_t cols = x.dim(mode);
  std::size_t inner = 1;
  for (std::size_t i = 0; i < mode; ++i) inner *= x.dim(i);
  std::size_t outer = 1;
  for (std::size_t i = mode + 1; i < x.order(); ++i) outer *= x.dim(i);

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                            static_cast<Eigen::Index>(cols));
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t a = 0; a < rows; ++a) {
      for (std::size_t b = 0; b < cols; ++b) {
        double acc = 0.0;
        const std::size_t ybase = o * inner * rows + a * inner;
        const std::size_t xbase = o * inner * cols + b * inner;
        for (std::size_t in = 0; in < inner; ++in)
          acc += dy.data()[ybase + in] * x.data()[xbase + in];
        w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += acc;
      }
    }
  }
  return w;
}

/// Forward cache of one relation-map chain (mode-n products with activation
/// between, none after the last).
struct ChainCache {
  std::vector<TensorP> inputs;   // input to product j, j = 0..k-1
  std::vector<TensorP> preacts;  // pre-activation after product j, j < k-1
  TensorP output;
};

inline ChainCache chain_forward(const TensorP& t, const std::vector<Eigen::MatrixXd>& ws,
                                Activation act, std::size_t mode) {
  ChainCache c;
  c.inputs.push_back(t);
  for (std::size_t j = 0; j < ws.size(); ++j) {
    TensorP p = mode_n_product(c.inputs.back(), ws[j], mode);
    if (j + 1 < ws.size()) {
      c.preacts.push_back(p);
      for (auto& v : p.data()) v = activate(act, v);
      c.inputs.push_back(std::move(p));
    } else {
      c.output = std::move(p);
    }
  }
  return c;
}

/// Reverse pass of chain_forward; returns the gradient at the chain input
/// and accumulates per-weight gradients.
inline TensorP chain_backward(const ChainCache& c, const std::vector<Eigen::MatrixXd>& ws,
                              Activation act, std::size_t mode, const TensorP& d_output,
                              std::vector<Eigen::MatrixXd>& d_ws) {
  const std::size_t k = ws.size();
  d_ws.assign(k, Eigen::MatrixXd());
  TensorP g = d_output;
  d_ws[k - 1] = mode_n_outer(g, c.inputs[k - 1], mode);
  g = mode_n_product(g, Eigen::MatrixXd(ws[k - 1].transpose()), mode);
  for (std::size_t jj = k - 1; jj-- > 0;) {
    for (std::size_t e = 0; e < g.size(); ++e)
      g.data()[e] *= activate_grad(act, c.preacts[jj].data()[e]);
    d_ws[jj] = mode_n_outer(g, c.inputs[jj], mode);
    g = mode_n_product(g, Eigen::MatrixXd(ws[jj].transpose()), mode);
  }
  return g;
}

}  // namespace detail

/// Per-iteration health indicators of the adapter pipeline.
struct PipelineDiagnostics {
  double pre_dcrc_energy_gap_rel = 0.0;   // max over text layers
  double post_dcrc_text_residual = 0.0;   // max ||R^T R - I||_F over text slices
};

namespace detail {

/// Everything the forward pass produces that the reverse pass consumes.
struct PipelineCache {
  std::vector<std::vector<Eigen::MatrixXd>> text_r;      // [L][b_e] Cayley images
  std::vector<std::vector<Eigen::MatrixXd>> text_ninv;   // [L][b_e] (I-Q)^{-1}
  RelationTensor relation;                               // T
  ChainCache chain3, chain4;                             // valid when DCRC ran
  TensorP t_w;
  RelationTensor updated;                                // T'
  std::vector<Eigen::MatrixXd> adj_text, adj_image;      // W' per layer
  TowerCache tower_v, tower_e;
  double loss = 0.0;
};

inline PipelineCache pipeline_forward(const RunConfig& cfg, const AdapterState& state,
                                      const PretrainedStack& stack, const SynthBatch& batch,
                                      bool enable_dcrc, PipelineDiagnostics* diag) {
  require(cfg.m == 1, "training pipeline adapts exactly one matrix per layer");
  require(stack.layer_count() == cfg.L, "stack/config layer mismatch");
  require(batch.size() >= 2, "batch must hold at least 2 pairs");

  PipelineCache c;
  std::vector<LayerTensor> layer_tensors;
  for (std::size_t l = 0; l < cfg.L; ++l) {
    std::vector<Eigen::MatrixXd> text_blocks, image_blocks, ninvs;
    for (const auto& p : state.text[l]) {
      const Eigen::MatrixXd q = to_skew(p);
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(q.rows(), q.cols());
      const Eigen::MatrixXd ninv = (eye - q).partialPivLu().solve(eye);
      text_blocks.push_back(ninv * (eye + q));  // == cayley(q), reusing the solve
      ninvs.push_back(ninv);
    }
    for (const auto& p : state.image[l])
      image_blocks.push_back(Eigen::MatrixXd::Identity(p.g.rows(), p.g.cols()) + p.g);
    layer_tensors.push_back(assemble_layer_tensor(text_blocks, image_blocks, l));
    c.text_r.push_back(std::move(text_blocks));
    c.text_ninv.push_back(std::move(ninvs));
  }
  c.relation = assemble_relation_tensor(layer_tensors);

  if (diag) {
    double worst = 0.0;
    for (std::size_t l = 0; l < cfg.L; ++l) {
      const Eigen::MatrixXd r_pre = assemble_block_diag(c.text_r[l]);
      const Eigen::MatrixXd& w0 = stack.layer(Modality::text, l);
      const double he0 = hyperspherical_energy(w0).energy;
      worst = std::max(worst, energy_gap(r_pre * w0, w0) / he0);
    }
    diag->pre_dcrc_energy_gap_rel = worst;
  }

  if (enable_dcrc) {
    c.chain3 = chain_forward(c.relation.t, state.maps.f3_weights, state.maps.activation,
                             kModalityMode);
    c.chain4 = chain_forward(c.chain3.output, state.maps.f4_weights, state.maps.activation,
                             kLayerMode);
    c.t_w = c.chain4.output;
    c.updated = dcrc_update(c.relation, c.t_w, state.alpha);
  } else {
    c.updated = c.relation;
  }

  if (diag) {
    double worst = 0.0;
    for (std::size_t l = 0; l < cfg.L; ++l)
      worst = std::max(worst, tower_slice_residual(c.updated, Modality::text, l));
    diag->post_dcrc_text_residual = worst;
  }

  for (std::size_t l = 0; l < cfg.L; ++l) {
    c.adj_text.push_back(apply_adjustment(c.updated, stack.layer(Modality::text, l),
                                          Modality::text, l));
    c.adj_image.push_back(apply_adjustment(c.updated, stack.layer(Modality::image, l),
                                           Modality::image, l));
  }

  c.tower_v = forward_tower_cached(stack, c.adj_image, batch.x_image, Modality::image);
  c.tower_e = forward_tower_cached(stack, c.adj_text, batch.x_text, Modality::text);
  c.loss = alignment_loss(c.tower_v.e_cols.transpose(), c.tower_e.e_cols.transpose(), cfg.tau);
  if (!std::isfinite(c.loss))
    throw std::runtime_error("pipeline: non-finite loss (adapter parameters diverged)");
  return c;
}

/// Reverse pass through one tower; returns per-layer gradients of the
/// adjusted weights given the gradient at the normalized embeddings.
inline std::vector<Eigen::MatrixXd> tower_backward(const PretrainedStack& stack,
                                                   const std::vector<Eigen::MatrixXd>& adjusted,
                                                   const TowerCache& cache,
                                                   const Eigen::MatrixXd& d_e_cols,
                                                   Modality modality) {
  const std::size_t layers = adjusted.size();
  // Through L2 normalization, column by column.
  Eigen::MatrixXd du(cache.u.rows(), cache.u.cols());
  for (Eigen::Index j = 0; j < cache.u.cols(); ++j) {
    const Eigen::VectorXd e = cache.e_cols.col(j);
    const Eigen::VectorXd g = d_e_cols.col(j);
    du.col(j) = (g - e.dot(g) * e) / cache.norms[j];
  }
  Eigen::MatrixXd dm = stack.projection(modality).transpose() * du;

  std::vector<Eigen::MatrixXd> d_weights(layers);
  for (std::size_t l = layers; l-- > 0;) {
    Eigen::MatrixXd da;
    if (l + 1 < layers) {
      const Eigen::MatrixXd& post = cache.acts[l + 1];  // tanh output
      da = (dm.array() * (1.0 - post.array().square())).matrix();
    } else {
      da = dm;
    }
    d_weights[l] = da * cache.acts[l].transpose();
    if (l > 0) dm = adjusted[l].transpose() * da;
  }
  return d_weights;
}

}  // namespace detail

/// Structure-preserving deep copy with all parameter values zeroed.
inline AdapterState zeros_like(const AdapterState& s) {
  AdapterState z = s;
  for (auto& row : z.text)
    for (auto& p : row) p.upper.setZero();
  for (auto& row : z.image)
    for (auto& p : row) p.g.setZero();
  for (auto& w : z.maps.f3_weights) w.setZero();
  for (auto& w : z.maps.f4_weights) w.setZero();
  z.alpha.setZero();
  return z;
}

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// Forward pass only; used by the finite-difference oracle and reporting.
inline double loss_value(const RunConfig& cfg, const AdapterState& state,
                         const PretrainedStack& stack, const SynthBatch& batch,
                         bool enable_dcrc = true, PipelineDiagnostics* diag = nullptr) {
  return detail::pipeline_forward(cfg, state, stack, batch, enable_dcrc, diag).loss;
}

/// Loss and its exact gradient with respect to every trainable parameter, in
/// the flat order documented on AdapterState. Gradients exist only for the
/// adapter; the pretrained stack contributes no coordinates.
inline LossGrad loss_and_grad(const RunConfig& cfg, const AdapterState& state,
                              const PretrainedStack& stack, const SynthBatch& batch,
                              bool enable_dcrc = true, PipelineDiagnostics* diag = nullptr) {
  using detail::PipelineCache;
  const PipelineCache c = detail::pipeline_forward(cfg, state, stack, batch, enable_dcrc, diag);
  const auto n = static_cast<Eigen::Index>(batch.size());
  const Eigen::MatrixXd z =
      (c.tower_v.e_cols.transpose() * c.tower_e.e_cols) / cfg.tau;  // n x n

  // d(loss)/dZ for the symmetric contrastive objective.
  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(n, n);
  const double w = 1.0 / (2.0 * static_cast<double>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = z.row(i).maxCoeff();
    Eigen::ArrayXd ex = (z.row(i).array() - mx).exp();
    dz.row(i) += (w * ex / ex.sum()).matrix();
    dz(i, i) -= w;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const double mx = z.col(k).maxCoeff();
    Eigen::ArrayXd ex = (z.col(k).array() - mx).exp();
    dz.col(k) += (w * ex / ex.sum()).matrix();
    dz(k, k) -= w;
  }

  const Eigen::MatrixXd d_ev = c.tower_e.e_cols * dz.transpose() / cfg.tau;  // d_s x n
  const Eigen::MatrixXd d_ee = c.tower_v.e_cols * dz / cfg.tau;

  const std::vector<Eigen::MatrixXd> d_adj_image =
      detail::tower_backward(stack, c.adj_image, c.tower_v, d_ev, Modality::image);
  const std::vector<Eigen::MatrixXd> d_adj_text =
      detail::tower_backward(stack, c.adj_text, c.tower_e, d_ee, Modality::text);

  // Gradients of the block-diagonal factors land on the relation-tensor
  // faces; off-block entries are structural zeros, not parameters.
  const std::size_t s = c.updated.slice_count();
  const auto q = static_cast<Eigen::Index>(cfg.q);
  TensorP d_updated(c.updated.t.dims());
  std::vector<std::size_t> slice_of_text(state.b_e), slice_of_image(state.b_v);
  {
    const auto pattern = interleave_pattern(state.b_v, state.b_e);
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      if (pattern[i].modality == Modality::image)
        slice_of_image[pattern[i].block] = i;
      else
        slice_of_text[pattern[i].block] = i;
    }
  }
  for (std::size_t l = 0; l < cfg.L; ++l) {
    const Eigen::MatrixXd db_text = d_adj_text[l] * stack.layer(Modality::text, l).transpose();
    for (std::size_t b = 0; b < state.b_e; ++b) {
      const auto o = static_cast<Eigen::Index>(b) * q;
      d_updated.set_frontal_slice(l * s + slice_of_text[b], db_text.block(o, o, q, q));
    }
    const Eigen::MatrixXd db_image = d_adj_image[l] * stack.layer(Modality::image, l).transpose();
    for (std::size_t b = 0; b < state.b_v; ++b) {
      const auto o = static_cast<Eigen::Index>(b) * q;
      d_updated.set_frontal_slice(l * s + slice_of_image[b], db_image.block(o, o, q, q));
    }
  }

  AdapterState grads = zeros_like(state);
  TensorP d_relation = d_updated;  // identity branch of T' = T + alpha.T_w

  if (enable_dcrc) {
    // Gate backward: alpha grads and the scaled path into the relation maps.
    TensorP d_tw(c.t_w.dims());
    const std::size_t face_size = cfg.q * cfg.q;
    for (std::size_t l = 0; l < cfg.L; ++l) {
      for (std::size_t i = 0; i < s; ++i) {
        const std::size_t base = (l * s + i) * face_size;
        const double a = state.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
        double acc = 0.0;
        for (std::size_t e = 0; e < face_size; ++e) {
          acc += d_updated.data()[base + e] * c.t_w.data()[base + e];
          d_tw.data()[base + e] = a * d_updated.data()[base + e];
        }
        grads.alpha(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = acc;
      }
    }
    std::vector<Eigen::MatrixXd> d_f4, d_f3;
    const TensorP d_chain3_out = detail::chain_backward(
        c.chain4, state.maps.f4_weights, state.maps.activation, kLayerMode, d_tw, d_f4);
    const TensorP d_t_from_maps = detail::chain_backward(
        c.chain3, state.maps.f3_weights, state.maps.activation, kModalityMode, d_chain3_out,
        d_f3);
    grads.maps.f3_weights = d_f3;
    grads.maps.f4_weights = d_f4;
    for (std::size_t e = 0; e < d_relation.size(); ++e)
      d_relation.data()[e] += d_t_from_maps.data()[e];
  }

  // Block backward: Cayley differential for text, direct for image.
  for (std::size_t l = 0; l < cfg.L; ++l) {
    for (std::size_t b = 0; b < state.b_e; ++b) {
      const Eigen::MatrixXd d_r = d_relation.frontal_slice(l * s + slice_of_text[b]);
      const Eigen::MatrixXd& r = c.text_r[l][b];
      const Eigen::MatrixXd& ninv = c.text_ninv[l][b];
      const Eigen::MatrixXd d_q =
          (Eigen::MatrixXd::Identity(q, q) + r).transpose() * d_r * ninv.transpose();
      auto& dst = grads.text[l][b];
      Eigen::Index t = 0;
      for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = i + 1; j < q; ++j) dst.upper[t++] = d_q(i, j) - d_q(j, i);
    }
    for (std::size_t b = 0; b < state.b_v; ++b)
      grads.image[l][b].g = d_relation.frontal_slice(l * s + slice_of_image[b]);
  }

  LossGrad out;
  out.loss = c.loss;
  out.grad = grads.flatten();
  detail::require(out.grad.allFinite(), "loss_and_grad: non-finite gradient");
  return out;
}

/// Central finite differences of an arbitrary scalar function.
inline Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h) {
  detail::require(h > 0.0, "finite_diff_grad: step must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double fp = f(p);
    p[i] = orig - h;
    const double fm = f(p);
    p[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Finite-difference oracle over the flattened adapter state.
inline Eigen::VectorXd finite_diff_grad(const RunConfig& cfg, const AdapterState& state,
                                        const PretrainedStack& stack, const SynthBatch& batch,
                                        double h, bool enable_dcrc = true) {
  AdapterState probe = state;
  return finite_diff_grad(
      [&](const Eigen::VectorXd& v) {
        probe.unflatten(v);
        return loss_value(cfg, probe, stack, batch, enable_dcrc);
      },
      state.flatten(), h);
}

struct AdamHyper {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;

  static AdamMoments zeros(Eigen::Index n) {
    AdamMoments mo;
    mo.m = Eigen::VectorXd::Zero(n);
    mo.v = Eigen::VectorXd::Zero(n);
    return mo;
  }
};

/// Standard Adam update with bias correction; deterministic given inputs.
inline void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamMoments& mo,
                      const AdamHyper& h) {
  detail::require(params.size() == grad.size() && params.size() == mo.m.size() &&
                      params.size() == mo.v.size(),
                  "adam_step: size mismatch");
  mo.step += 1;
  mo.m = h.beta1 * mo.m + (1.0 - h.beta1) * grad;
  mo.v = (h.beta2 * mo.v.array() + (1.0 - h.beta2) * grad.array().square()).matrix();
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(mo.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(mo.step));
  params.array() -=
      h.lr * (mo.m.array() / bc1) / ((mo.v.array() / bc2).sqrt() + h.eps);
}

}  // namespace orthotune
