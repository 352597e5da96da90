#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "orthotune/checkpoint.hpp"
#include "orthotune/energy.hpp"
#include "orthotune/selfcheck.hpp"
#include "orthotune/train.hpp"

namespace orthotune::cli {

/// Exit-code contract: 0 success, 1 property/training failure, 2 usage or
/// configuration error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  detail::require(in.good(), "cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg = config_from_string(buf.str());
  if (const char* env = std::getenv("SEED_OVERRIDE")) {
    const std::string text(env);
    std::size_t pos = 0;
    unsigned long long parsed = 0;
    try {
      parsed = std::stoull(text, &pos);
    } catch (const std::exception&) {
      throw contract_error("SEED_OVERRIDE must be a nonnegative integer, got '" + text + "'");
    }
    detail::require(pos == text.size(),
                    "SEED_OVERRIDE must be a nonnegative integer, got '" + text + "'");
    cfg.seed = static_cast<std::uint64_t>(parsed);
  }
  return cfg;
}

inline nlohmann::json to_json(const EnergyReport& r) {
  return nlohmann::json{{"energy", r.energy},
                        {"pair_count", r.pair_count},
                        {"min_pair_distance", r.min_pair_distance},
                        {"clipped_pairs", r.clipped_pairs}};
}

inline int cmd_check(const selfcheck::CheckOptions& opts, std::ostream& out) {
  const auto families = selfcheck::run_suite(opts);
  out << selfcheck::to_json(families, opts).dump(2) << '\n';
  return selfcheck::all_pass(families) ? kExitOk : kExitFailure;
}

inline int cmd_tprod_selftest(std::ostream& out) {
  selfcheck::CheckOptions opts;
  opts.filter = "tproduct";
  return cmd_check(opts, out);
}

inline int cmd_train(const std::string& config_path, const std::string& report_path,
                     const std::string& checkpoint_path,
                     const std::optional<std::string>& resume_path, std::ostream& out) {
  const RunConfig cfg = load_run_config(config_path);
  TrainOptions opts;
  if (resume_path) {
    const Checkpoint ck = load_checkpoint(*resume_path, cfg);
    opts.resume_state = state_from_checkpoint(ck, cfg);
    opts.resume_moments = ck.moments;
  }
  const TrainResult result = train(cfg, opts);

  std::ofstream report_out(report_path);
  detail::require(report_out.good(), "cannot open '" + report_path + "' for writing");
  report_out << to_json(result.report).dump(2) << '\n';
  detail::require(report_out.good(), "failed writing '" + report_path + "'");
  save_checkpoint(checkpoint_path, cfg, result.state, result.moments);

  out << "trained " << cfg.iterations << " iterations: loss " << result.report.init_loss
      << " -> " << result.report.final_loss << " (ratio "
      << result.report.final_loss / result.report.init_loss << ")\n"
      << "report: " << report_path << "\ncheckpoint: " << checkpoint_path << "\n";
  return kExitOk;
}

/// Relative text-tower gap beyond which the energy report flags a violation.
inline constexpr double kEnergyViolationTol = 1e-8;

inline int cmd_energy_report(const std::string& config_path,
                             const std::optional<std::string>& checkpoint_path,
                             std::ostream& out) {
  const RunConfig cfg = load_run_config(config_path);
  detail::require(cfg.m == 1, "energy report adapts exactly one matrix per layer");
  const PretrainedStack stack = PretrainedStack::make(cfg, cfg.seed);

  AdapterState state = AdapterState::init(cfg);
  if (checkpoint_path) {
    const Checkpoint ck = load_checkpoint(*checkpoint_path, cfg);
    state = state_from_checkpoint(ck, cfg);
  }

  // Realize blocks, with and without the communication stage.
  std::vector<LayerTensor> lts;
  std::vector<std::vector<Eigen::MatrixXd>> text_blocks(cfg.L), image_blocks(cfg.L);
  for (std::size_t l = 0; l < cfg.L; ++l) {
    for (const auto& p : state.text[l]) text_blocks[l].push_back(cayley(to_skew(p)));
    for (const auto& p : state.image[l])
      image_blocks[l].push_back(Eigen::MatrixXd::Identity(p.g.rows(), p.g.cols()) + p.g);
    lts.push_back(assemble_layer_tensor(text_blocks[l], image_blocks[l], l));
  }
  const RelationTensor relation = assemble_relation_tensor(lts);
  const RelationTensor updated =
      dcrc_update(relation, relation_apply(relation, state.maps), state.alpha);

  int violations = 0;
  nlohmann::json towers = nlohmann::json::array();
  for (Modality modality : {Modality::text, Modality::image}) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < cfg.L; ++l) {
      const Eigen::MatrixXd& w0 = stack.layer(modality, l);
      const auto& blocks = modality == Modality::text ? text_blocks[l] : image_blocks[l];
      const Eigen::MatrixXd w_pre = assemble_block_diag(blocks) * w0;
      const Eigen::MatrixXd w_adj = apply_adjustment(updated, w0, modality, l);

      const EnergyReport he0 = hyperspherical_energy(w0);
      const EnergyReport he_pre = hyperspherical_energy(w_pre);
      const EnergyReport he_adj = hyperspherical_energy(w_adj);
      const double gap_pre = std::abs(he_pre.energy - he0.energy);
      const double gap_adj = std::abs(he_adj.energy - he0.energy);
      const bool violation =
          modality == Modality::text && gap_pre > kEnergyViolationTol * he0.energy;
      if (violation) ++violations;
      layers.push_back({{"layer", l},
                        {"pretrained", to_json(he0)},
                        {"pre_dcrc", to_json(he_pre)},
                        {"gap_pre_dcrc", gap_pre},
                        {"gap_pre_dcrc_rel", gap_pre / he0.energy},
                        {"pre_dcrc_violation", violation},
                        {"adjusted", to_json(he_adj)},
                        {"gap_adjusted", gap_adj},
                        {"gap_adjusted_rel", gap_adj / he0.energy}});
    }
    towers.push_back({{"modality", modality_name(modality)}, {"layers", layers}});
  }

  const nlohmann::json report{{"config_hash", config_hash(cfg)},
                              {"seed", cfg.seed},
                              {"checkpoint", checkpoint_path ? nlohmann::json(*checkpoint_path)
                                                             : nlohmann::json(nullptr)},
                              {"violation_tolerance_rel", kEnergyViolationTol},
                              {"violations", violations},
                              {"towers", towers}};
  out << report.dump(2) << '\n';
  return violations == 0 ? kExitOk : kExitFailure;
}

inline int cmd_param_count(const std::string& config_path, std::ostream& out) {
  const RunConfig cfg = load_run_config(config_path);
  const ParamCountReport r = count_parameters(cfg);
  const nlohmann::json report{
      {"config_hash", config_hash(cfg)},
      {"components",
       {{"text_skew", r.text_skew},
        {"image_general", r.image_general},
        {"relation_maps", r.relation_maps},
        {"alpha", r.alpha}}},
      {"trainable", r.trainable},
      {"frozen", r.frozen},
      {"ratio", r.ratio},
      {"caveat",
       "informational — the ratio counts the adapted per-layer matrices and projections of "
       "this architecture; which matrices of a full-scale dual encoder receive adapters is a "
       "modeling choice (m)"}};
  out << report.dump(2) << '\n';
  return kExitOk;
}

}  // namespace orthotune::cli
