#pragma once

#include <chrono>
#include <optional>
#include <vector>

#include <json.hpp>

#include "orthotune/adapter.hpp"
#include "orthotune/grad.hpp"
#include "orthotune/toy_model.hpp"

namespace orthotune {

/// Per-run diagnostics. Loss and the health curves have one entry per
/// iteration, recorded for the state entering that iteration.
struct TrainReport {
  std::vector<double> loss;
  std::vector<double> energy_gap_pre_dcrc;   // relative, max over text layers
  std::vector<double> ortho_residual_post;   // max over text slices
  std::vector<double> grad_norm;
  double init_loss = 0.0;
  double final_loss = 0.0;
  std::int64_t trainable_params = 0;
  std::int64_t frozen_params = 0;
  double param_ratio = 0.0;
  double wall_clock_sec = 0.0;
  std::uint64_t seed = 0;
  RunConfig config;
};

struct TrainOptions {
  bool enable_dcrc = true;
  std::optional<AdapterState> resume_state;
  std::optional<AdamMoments> resume_moments;
};

struct TrainResult {
  TrainReport report;
  AdapterState state;
  AdamMoments moments;
};

inline TrainResult train(const RunConfig& cfg, const TrainOptions& opts = {}) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const PretrainedStack stack = PretrainedStack::make(cfg, cfg.seed);
  const SynthBatch batch = synth_pairs(cfg, cfg.seed, cfg.batch_size);

  AdapterState state = opts.resume_state ? *opts.resume_state : AdapterState::init(cfg);
  Eigen::VectorXd params = state.flatten();
  AdamMoments moments =
      opts.resume_moments ? *opts.resume_moments : AdamMoments::zeros(params.size());
  detail::require(moments.m.size() == params.size(), "train: resume moments size mismatch");
  const AdamHyper hyper{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps};

  TrainResult out;
  TrainReport& rep = out.report;
  rep.seed = cfg.seed;
  rep.config = cfg;
  rep.loss.reserve(cfg.iterations);

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    PipelineDiagnostics diag;
    const LossGrad lg = loss_and_grad(cfg, state, stack, batch, opts.enable_dcrc, &diag);
    rep.loss.push_back(lg.loss);
    rep.energy_gap_pre_dcrc.push_back(diag.pre_dcrc_energy_gap_rel);
    rep.ortho_residual_post.push_back(diag.post_dcrc_text_residual);
    rep.grad_norm.push_back(lg.grad.norm());
    adam_step(params, lg.grad, moments, hyper);
    state.unflatten(params);
  }

  rep.init_loss = rep.loss.front();
  rep.final_loss = rep.loss.back();
  const ParamCountReport counts = count_parameters(cfg);
  rep.trainable_params = counts.trainable;
  rep.frozen_params = counts.frozen;
  rep.param_ratio = counts.ratio;
  rep.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  out.state = std::move(state);
  out.moments = std::move(moments);
  return out;
}

inline nlohmann::json to_json(const TrainReport& r) {
  return nlohmann::json{{"config", to_json(r.config)},
                        {"config_hash", config_hash(r.config)},
                        {"seed", r.seed},
                        {"iterations", r.loss.size()},
                        {"loss", r.loss},
                        {"energy_gap_pre_dcrc", r.energy_gap_pre_dcrc},
                        {"ortho_residual_post_dcrc", r.ortho_residual_post},
                        {"grad_norm", r.grad_norm},
                        {"init_loss", r.init_loss},
                        {"final_loss", r.final_loss},
                        {"trainable_params", r.trainable_params},
                        {"frozen_params", r.frozen_params},
                        {"param_ratio", r.param_ratio},
                        {"wall_clock_sec", r.wall_clock_sec}};
}

}  // namespace orthotune
