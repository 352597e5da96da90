#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "orthotune/adapter.hpp"
#include "orthotune/dcrc.hpp"
#include "orthotune/energy.hpp"
#include "orthotune/grad.hpp"
#include "orthotune/tprod.hpp"

namespace orthotune::selfcheck {

struct PropertyResult {
  std::string name;
  double tolerance = 0.0;
  double observed = 0.0;
  bool pass = false;
};

struct FamilyResult {
  std::string name;
  std::vector<PropertyResult> properties;

  bool all_pass() const {
    for (const auto& p : properties)
      if (!p.pass) return false;
    return true;
  }
};

struct CheckOptions {
  std::string filter;        // empty = all families
  std::string inject_fault;  // empty = none; "cayley" corrupts the Cayley map
  std::uint64_t seed = 1234;
};

namespace detail_sc {

using orthotune::detail::require;

inline TensorP random_tensor(Rng& rng, std::vector<std::size_t> dims) {
  TensorP t(std::move(dims));
  for (auto& v : t.data()) v = rng.gaussian();
  return t;
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.gaussian();
  return m;
}

inline SkewParam random_skew(Rng& rng, std::size_t q) {
  SkewParam p = SkewParam::zeros(q);
  for (Eigen::Index i = 0; i < p.upper.size(); ++i) p.upper[i] = rng.gaussian();
  return p;
}

// Circular-convolution oracle for the circulant T-product (independent of
// circ/unfold/fold).
inline TensorP tprod_conv_oracle(const TensorP& a, const TensorP& b) {
  std::vector<std::size_t> out_dims = a.dims();
  out_dims[1] = b.dim(1);
  TensorP out(out_dims);
  std::vector<std::size_t> trailing(a.dims().begin() + 2, a.dims().end());
  std::vector<std::size_t> cidx(trailing.size(), 0);
  for (std::size_t k = 0; k < out.face_count(); ++k) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a.dim(0)),
                                                static_cast<Eigen::Index>(b.dim(1)));
    std::vector<std::size_t> midx(trailing.size(), 0);
    for (std::size_t mk = 0; mk < a.face_count(); ++mk) {
      std::size_t aface = 0, stride = 1;
      for (std::size_t t = 0; t < trailing.size(); ++t) {
        aface += ((cidx[t] + trailing[t] - midx[t]) % trailing[t]) * stride;
        stride *= trailing[t];
      }
      acc += a.frontal_slice(aface) * b.frontal_slice(mk);
      for (std::size_t t = 0; t < trailing.size(); ++t) {
        if (++midx[t] < trailing[t]) break;
        midx[t] = 0;
      }
    }
    out.set_frontal_slice(k, acc);
    for (std::size_t t = 0; t < trailing.size(); ++t) {
      if (++cidx[t] < trailing[t]) break;
      cidx[t] = 0;
    }
  }
  return out;
}

struct Suite {
  FamilyResult family;
  void record(const std::string& name, double tolerance, double observed) {
    family.properties.push_back({name, tolerance, observed, observed <= tolerance});
  }
  void record_exceeds(const std::string& name, double threshold, double observed) {
    // Pass when the observed value EXCEEDS the threshold (violation detectors).
    family.properties.push_back({name, threshold, observed, observed > threshold});
  }
};

inline FamilyResult check_tensor_core(std::uint64_t seed) {
  Suite s;
  s.family.name = "tensor_core";
  Rng rng(seed);

  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const TensorP a = random_tensor(rng, {2, 3, 2, 2});
    worst = std::max(worst, max_abs_diff(fold(unfold(a), 2), a));
  }
  s.record("fold_unfold_identity", 0.0, worst);

  {
    const TensorP a = random_tensor(rng, {2, 2, 3});
    const Eigen::MatrixXd big = circ(a).frontal_slice(0);
    const Eigen::MatrixXd unf = unfold(a).frontal_slice(0);
    double diff = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      Eigen::MatrixXd picker = Eigen::MatrixXd::Zero(6, 2);
      picker.block(static_cast<Eigen::Index>(2 * k), 0, 2, 2) = Eigen::MatrixXd::Identity(2, 2);
      const Eigen::MatrixXd got = big * picker;
      for (std::size_t r = 0; r < 3; ++r)
        diff = std::max(diff, (got.block(static_cast<Eigen::Index>(2 * ((r + k) % 3)), 0, 2, 2) -
                               unf.block(static_cast<Eigen::Index>(2 * r), 0, 2, 2))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    s.record("circ_identity_rotation", 0.0, diff);
  }

  {
    const TensorP a = random_tensor(rng, {3, 2, 4});
    s.record("mode_n_identity_exact", 0.0,
             max_abs_diff(mode_n_product(a, Eigen::MatrixXd::Identity(4, 4), 2), a));
    const Eigen::MatrixXd m =
        Eigen::MatrixXd(Eigen::MatrixXd::Identity(4, 4)) + 0.3 * random_matrix(rng, 4, 4);
    const Eigen::MatrixXd minv = m.partialPivLu().solve(Eigen::MatrixXd::Identity(4, 4));
    s.record("mode_n_inverse_roundtrip", 1e-10,
             max_abs_diff(mode_n_product(mode_n_product(a, m, 2), minv, 2), a));
    double oracle_diff = 0.0;
    const TensorP got = mode_n_product(a, m, 2);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t o = 0; o < 4; ++o) {
          double acc = 0.0;
          for (std::size_t t = 0; t < 4; ++t)
            acc +=
                m(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(t)) * a(i, j, t);
          oracle_diff = std::max(oracle_diff, std::abs(got(i, j, o) - acc));
        }
    s.record("mode_n_loop_oracle", 1e-12, oracle_diff);
  }

  {
    const TensorP a = random_tensor(rng, {2, 3, 4});
    const TensorP b = random_tensor(rng, {3, 2, 4});
    const TensorP c = random_tensor(rng, {2, 3, 4});
    s.record("facewise_associativity", 1e-12,
             max_abs_diff(facewise_product(facewise_product(a, b), c),
                          facewise_product(a, facewise_product(b, c))));
  }
  return s.family;
}

inline FamilyResult check_tproduct(std::uint64_t seed) {
  Suite s;
  s.family.name = "tproduct";
  Rng rng(seed);

  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n1 = 1 + rng.bits() % 4, n2 = 1 + rng.bits() % 4;
    const std::size_t l = 1 + rng.bits() % 4, n3 = 1 + rng.bits() % 5;
    const TensorP a = random_tensor(rng, {n1, n2, n3});
    const TensorP b = random_tensor(rng, {n2, l, n3});
    worst = std::max(worst, max_abs_diff(tprod3(a, b), tprod_conv_oracle(a, b)));
  }
  s.record("tprod3_circulant_oracle", 1e-12, worst);

  worst = 0.0;
  for (const auto& dims :
       {std::vector<std::size_t>{2, 2, 2, 2}, std::vector<std::size_t>{3, 2, 2, 2}}) {
    const TensorP a = random_tensor(rng, dims);
    std::vector<std::size_t> bdims = dims;
    bdims[0] = dims[1];
    bdims[1] = 3;
    const TensorP b = random_tensor(rng, bdims);
    worst = std::max(worst, max_abs_diff(tprodN(a, b), tprod_conv_oracle(a, b)));
  }
  s.record("tprodN_recursive_oracle", 1e-11, worst);

  {
    const TensorP a = random_tensor(rng, {3, 2, 4});
    const TensorP b = random_tensor(rng, {2, 4, 4});
    s.record("dft_equivalence_order3", 1e-9,
             max_abs_diff(transform_tprod(a, b, dft_transform_set(a.dims())), tprod3(a, b)));
    const TensorP a4 = random_tensor(rng, {2, 2, 3, 2});
    const TensorP b4 = random_tensor(rng, {2, 3, 3, 2});
    s.record("dft_equivalence_order4", 1e-9,
             max_abs_diff(transform_tprod(a4, b4, dft_transform_set(a4.dims())), tprodN(a4, b4)));
  }

  {
    const TensorP a = random_tensor(rng, {2, 2, 3, 2});
    std::vector<Eigen::MatrixXd> mats{
        Eigen::MatrixXd(Eigen::MatrixXd::Identity(3, 3) + 0.3 * random_matrix(rng, 3, 3)),
        Eigen::MatrixXd(Eigen::MatrixXd::Identity(2, 2) + 0.3 * random_matrix(rng, 2, 2))};
    TransformSetD ts(mats);
    s.record("transform_roundtrip", 1e-10,
             max_abs_diff(transform_inverse(transform_forward(a, ts), ts), a));
  }

  {
    const TensorP a = random_tensor(rng, {2, 3, 4});
    const TensorP b = random_tensor(rng, {3, 2, 4});
    const TensorP c = random_tensor(rng, {2, 3, 4});
    s.record("tprod3_associativity", 1e-10,
             max_abs_diff(tprod3(tprod3(a, b), c), tprod3(a, tprod3(b, c))));
    const TensorP x = random_tensor(rng, {3, 2, 1, 1});
    const TensorP y = random_tensor(rng, {2, 4, 1, 1});
    s.record("trailing_ones_matmul", 1e-12,
             (tprodN(x, y).frontal_slice(0) - x.frontal_slice(0) * y.frontal_slice(0))
                 .cwiseAbs()
                 .maxCoeff());
  }
  return s.family;
}

inline FamilyResult check_hyperspherical(std::uint64_t seed) {
  Suite s;
  s.family.name = "hyperspherical";
  Rng rng(seed);

  s.record("identity2x2_value", 1e-14,
           std::abs(hyperspherical_energy(Eigen::MatrixXd::Identity(2, 2)).energy -
                    std::sqrt(2.0)));

  const Eigen::MatrixXd w = random_matrix(rng, 4, 6);
  s.record("scale_invariance", 1e-12,
           std::abs(hyperspherical_energy(w).energy - hyperspherical_energy(3.0 * w).energy));

  const Eigen::MatrixXd r = cayley(to_skew(random_skew(rng, 4)));
  s.record("orthogonal_invariance_rel", 1e-8,
           energy_gap(r * w, w) / hyperspherical_energy(w).energy);

  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(6, 6);
  p(0, 3) = p(1, 0) = p(2, 5) = p(3, 1) = p(4, 2) = p(5, 4) = 1.0;
  s.record("permutation_invariance", 1e-12,
           std::abs(hyperspherical_energy(w).energy - hyperspherical_energy(w * p).energy));

  Eigen::MatrixXd two(2, 2);
  two << 1.0, std::cos(0.8), 0.0, std::sin(0.8);
  Eigen::MatrixXd closer(2, 2);
  closer << 1.0, std::cos(0.4), 0.0, std::sin(0.4);
  s.record_exceeds("monotone_closer_neurons", 0.0,
                   hyperspherical_energy(closer).energy - hyperspherical_energy(two).energy);
  return s.family;
}

inline FamilyResult check_ortho_param(std::uint64_t seed, const std::string& fault) {
  Suite s;
  s.family.name = "ortho_param";
  Rng rng(seed);
  const bool fault_cayley = fault == "cayley";

  double worst = 0.0;
  for (std::size_t q : {2u, 4u, 8u, 16u}) {
    for (int rep = 0; rep < 25; ++rep) {
      const Eigen::MatrixXd skew = to_skew(random_skew(rng, q));
      Eigen::MatrixXd rot;
      if (fault_cayley) {
        // Injected fault: drop the inverse factor. The result is not
        // orthogonal, and the property below must catch it.
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(skew.rows(), skew.cols());
        rot = (eye + skew) * (eye - skew);
      } else {
        rot = cayley(skew);
      }
      worst = std::max(worst, orthogonality_residual(rot));
    }
  }
  s.record("cayley_orthogonality", 1e-10, worst);

  {
    Eigen::MatrixXd q2(2, 2);
    q2 << 0, 1, -1, 0;
    s.record("cayley_closed_form_2x2", 1e-14, (cayley(q2) - q2).cwiseAbs().maxCoeff());
    const Eigen::MatrixXd skew = to_skew(random_skew(rng, 8));
    const Eigen::MatrixXd r = cayley(skew);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(8, 8);
    s.record("cayley_defining_equation", 1e-10, ((eye - skew) * r - (eye + skew)).norm());
  }

  {
    std::vector<Eigen::MatrixXd> blocks{cayley(to_skew(random_skew(rng, 4))),
                                        cayley(to_skew(random_skew(rng, 4)))};
    s.record("block_diag_orthogonality", 1e-10,
             orthogonality_residual(assemble_block_diag(blocks)));
    blocks[1](0, 0) += 0.5;
    s.record_exceeds("block_diag_violation_detected", 1e-3,
                     orthogonality_residual(assemble_block_diag(blocks)));
  }

  s.record("identity_at_zero", 0.0,
           (pop_block(SkewParam::zeros(4), Modality::text) - Eigen::MatrixXd::Identity(4, 4))
               .cwiseAbs()
               .maxCoeff());

  const PopCounts counts = pop_param_counts(8, 8, 4, 2, 1);
  s.record("param_count_closed_form", 0.0,
           std::abs(static_cast<double>(counts.text_skew - 24)) +
               std::abs(static_cast<double>(counts.image_general - 64)));
  return s.family;
}

inline FamilyResult check_dcrc(std::uint64_t seed) {
  Suite s;
  s.family.name = "dcrc";
  Rng rng(seed);

  std::vector<LayerTensor> lts;
  for (std::size_t l = 0; l < 2; ++l) {
    std::vector<Eigen::MatrixXd> text{random_matrix(rng, 2, 2), random_matrix(rng, 2, 2)};
    std::vector<Eigen::MatrixXd> image{random_matrix(rng, 2, 2), random_matrix(rng, 2, 2)};
    lts.push_back(assemble_layer_tensor(text, image, l));
  }
  const RelationTensor rt = assemble_relation_tensor(lts);

  {
    const TensorP tw = random_tensor(rng, rt.t.dims());
    const RelationTensor out = dcrc_update(rt, tw, Eigen::MatrixXd::Zero(4, 2));
    s.record("gate_zero_noop", 0.0, max_abs_diff(out.t, rt.t));
  }

  {
    RelationMaps lin;
    lin.variant = RelationVariant::linear;
    lin.f3_weights = {random_matrix(rng, 4, 4)};
    lin.f4_weights = {random_matrix(rng, 2, 2)};
    RelationMaps mlp = lin;
    mlp.variant = RelationVariant::mlp;
    mlp.activation = Activation::identity;
    s.record("linear_equals_mlp_k1", 1e-12,
             max_abs_diff(relation_transform(rt, lin), relation_transform_mlp(rt, mlp)));

    const TensorP got = relation_transform(rt, lin);
    double diff = 0.0;
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t i = 0; i < 4; ++i)
          for (std::size_t l = 0; l < 2; ++l) {
            double acc = 0.0;
            for (std::size_t j = 0; j < 4; ++j)
              for (std::size_t m2 = 0; m2 < 2; ++m2)
                acc += lin.f3_weights[0](static_cast<Eigen::Index>(i),
                                         static_cast<Eigen::Index>(j)) *
                       lin.f4_weights[0](static_cast<Eigen::Index>(l),
                                         static_cast<Eigen::Index>(m2)) *
                       rt.t(a, b, j, m2);
            diff = std::max(diff, std::abs(got(a, b, i, l) - acc));
          }
    s.record("relation_transform_composition_oracle", 1e-12, diff);
    s.record("shape_preservation", 0.0, got.same_dims(rt.t) ? 0.0 : 1.0);
  }

  {
    const std::vector<Eigen::MatrixXd> eye(2, Eigen::MatrixXd::Identity(2, 2));
    std::vector<LayerTensor> id_layers{assemble_layer_tensor(eye, eye, 0)};
    const RelationTensor id_rt = assemble_relation_tensor(id_layers);
    const Eigen::MatrixXd w = random_matrix(rng, 4, 4);
    s.record("apply_adjustment_identity", 0.0,
             (apply_adjustment(id_rt, w, Modality::text, 0) - w).cwiseAbs().maxCoeff());
  }
  return s.family;
}

inline FamilyResult check_grad_engine(std::uint64_t seed) {
  Suite s;
  s.family.name = "grad_engine";
  Rng rng(seed);

  for (RelationVariant variant : {RelationVariant::linear, RelationVariant::mlp}) {
    RunConfig cfg;
    cfg.d_s = 4;
    cfg.batch_size = 8;
    cfg.relation_variant = variant;
    cfg.seed = seed;
    cfg.validate();
    const PretrainedStack stack = PretrainedStack::make(cfg, seed);
    const SynthBatch batch = synth_pairs(cfg, seed, cfg.batch_size);
    AdapterState state = AdapterState::init(cfg);
    Eigen::VectorXd v = state.flatten();
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] += 0.15 * rng.gaussian();
    state.unflatten(v);

    const LossGrad lg = loss_and_grad(cfg, state, stack, batch);
    const Eigen::VectorXd fd = finite_diff_grad(cfg, state, stack, batch, 1e-5);
    double score = 0.0;
    for (Eigen::Index i = 0; i < fd.size(); ++i) {
      const double denom = 1e-8 + 1e-4 * std::max(std::abs(lg.grad[i]), std::abs(fd[i]));
      score = std::max(score, std::abs(lg.grad[i] - fd[i]) / denom);
    }
    s.record(variant == RelationVariant::linear ? "fd_agreement_linear" : "fd_agreement_mlp",
             1.0, score);

    state.alpha.setZero();
    const LossGrad gated = loss_and_grad(cfg, state, stack, batch);
    const std::size_t blocks = cfg.L * cfg.blocks_text() * SkewParam::param_count(cfg.q) +
                               cfg.L * cfg.blocks_image() * cfg.q * cfg.q;
    const std::size_t alpha_len = cfg.slice_count() * cfg.L;
    const auto maps_len = static_cast<Eigen::Index>(state.param_count() - blocks - alpha_len);
    if (variant == RelationVariant::linear)
      s.record("chain_rule_locality", 0.0,
               gated.grad.segment(static_cast<Eigen::Index>(blocks), maps_len)
                   .cwiseAbs()
                   .maxCoeff());

    if (variant == RelationVariant::linear) {
      AdapterState probe = AdapterState::init(cfg);
      probe.unflatten(v);
      s.record("flatten_roundtrip", 0.0, (probe.flatten() - v).cwiseAbs().maxCoeff());
    }
  }

  {
    auto cubic = [](const Eigen::VectorXd& x) { return x[0] * x[0] * x[0]; };
    Eigen::VectorXd at(1);
    at << 1.0;
    const double e1 = std::abs(finite_diff_grad(cubic, at, 1e-2)[0] - 3.0);
    const double e2 = std::abs(finite_diff_grad(cubic, at, 5e-3)[0] - 3.0);
    s.record("richardson_ratio", 0.05, std::abs(e1 / e2 - 4.0));
  }

  {
    Eigen::VectorXd p(2);
    p << 1, 2;
    const Eigen::VectorXd before = p;
    AdamMoments mo = AdamMoments::zeros(2);
    adam_step(p, Eigen::VectorXd::Zero(2), mo, AdamHyper{});
    s.record("adam_zero_grad", 0.0, (p - before).cwiseAbs().maxCoeff());
  }
  return s.family;
}

}  // namespace detail_sc

inline const std::vector<std::string>& family_names() {
  static const std::vector<std::string> names = {"tensor_core",  "tproduct", "hyperspherical",
                                                 "ortho_param",  "dcrc",     "grad_engine"};
  return names;
}

/// Runs the invariant suite with fixed seeds. An unknown filter or fault
/// name is a usage error.
inline std::vector<FamilyResult> run_suite(const CheckOptions& opts) {
  using namespace detail_sc;
  if (!opts.inject_fault.empty())
    require(opts.inject_fault == "cayley",
            "unknown fault '" + opts.inject_fault + "' (available: cayley)");
  if (!opts.filter.empty()) {
    bool known = false;
    for (const auto& n : family_names()) known = known || n == opts.filter;
    require(known, "unknown check family '" + opts.filter + "'");
  }

  std::vector<FamilyResult> out;
  auto want = [&](const char* name) { return opts.filter.empty() || opts.filter == name; };
  if (want("tensor_core")) out.push_back(check_tensor_core(opts.seed));
  if (want("tproduct")) out.push_back(check_tproduct(opts.seed + 1));
  if (want("hyperspherical")) out.push_back(check_hyperspherical(opts.seed + 2));
  if (want("ortho_param")) out.push_back(check_ortho_param(opts.seed + 3, opts.inject_fault));
  if (want("dcrc")) out.push_back(check_dcrc(opts.seed + 4));
  if (want("grad_engine")) out.push_back(check_grad_engine(opts.seed + 5));
  return out;
}

inline bool all_pass(const std::vector<FamilyResult>& families) {
  for (const auto& f : families)
    if (!f.all_pass()) return false;
  return true;
}

inline nlohmann::json to_json(const std::vector<FamilyResult>& families,
                              const CheckOptions& opts) {
  nlohmann::json fam = nlohmann::json::array();
  for (const auto& f : families) {
    nlohmann::json props = nlohmann::json::array();
    for (const auto& p : f.properties)
      props.push_back({{"name", p.name},
                       {"tolerance", p.tolerance},
                       {"observed", p.observed},
                       {"pass", p.pass}});
    fam.push_back({{"name", f.name}, {"all_pass", f.all_pass()}, {"properties", props}});
  }
  return nlohmann::json{{"seed", opts.seed},
                        {"filter", opts.filter},
                        {"inject_fault", opts.inject_fault},
                        {"families", fam},
                        {"all_pass", all_pass(families)}};
}

}  // namespace orthotune::selfcheck
