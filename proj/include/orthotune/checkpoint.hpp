#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "orthotune/adapter.hpp"
#include "orthotune/config.hpp"
#include "orthotune/grad.hpp"

namespace orthotune {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; this platform is not");

/// Checkpoint layout: one JSON header line (config hash, parameter count,
/// optimizer step), then param_count little-endian float64 parameters in the
/// flat AdapterState order, then the Adam first and second moments (same
/// length each).
struct Checkpoint {
  std::string config_hash;
  Eigen::VectorXd params;
  AdamMoments moments;
};

inline void save_checkpoint(const std::string& path, const RunConfig& cfg,
                            const AdapterState& state, const AdamMoments& moments) {
  const Eigen::VectorXd params = state.flatten();
  detail::require(params.size() == moments.m.size() && params.size() == moments.v.size(),
                  "checkpoint: moments/state size mismatch");
  std::ofstream out(path, std::ios::binary);
  detail::require(out.good(), "checkpoint: cannot open '" + path + "' for writing");

  const nlohmann::json header{{"format", "orthotune-checkpoint-v1"},
                              {"config_hash", config_compat_hash(cfg)},
                              {"param_count", params.size()},
                              {"adam_step", moments.step}};
  out << header.dump() << '\n';
  auto write_vec = [&out](const Eigen::VectorXd& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
  };
  write_vec(params);
  write_vec(moments.m);
  write_vec(moments.v);
  detail::require(out.good(), "checkpoint: write failed for '" + path + "'");
}

/// Loads and verifies a checkpoint against the config it claims to extend.
/// A hash mismatch (different or tampered config) is a hard error.
inline Checkpoint load_checkpoint(const std::string& path, const RunConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  detail::require(in.good(), "checkpoint: cannot open '" + path + "'");
  std::string header_line;
  std::getline(in, header_line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::parse_error&) {
    throw contract_error("checkpoint: malformed header line");
  }
  detail::require(header.value("format", "") == "orthotune-checkpoint-v1",
                  "checkpoint: unknown format tag");

  Checkpoint ck;
  ck.config_hash = header.value("config_hash", "");
  detail::require(ck.config_hash == config_compat_hash(cfg),
                  "checkpoint: config hash mismatch (checkpoint belongs to a different config)");

  const auto n = header.at("param_count").get<Eigen::Index>();
  const AdapterState probe = AdapterState::init(cfg);
  detail::require(n == static_cast<Eigen::Index>(probe.param_count()),
                  "checkpoint: parameter count does not match config");
  ck.moments.step = header.at("adam_step").get<std::int64_t>();

  auto read_vec = [&in, n](Eigen::VectorXd& v) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n)));
    detail::require(in.gcount() ==
                        static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n)),
                    "checkpoint: truncated payload");
  };
  read_vec(ck.params);
  read_vec(ck.moments.m);
  read_vec(ck.moments.v);
  return ck;
}

/// Reconstructs the adapter state a checkpoint stores.
inline AdapterState state_from_checkpoint(const Checkpoint& ck, const RunConfig& cfg) {
  AdapterState s = AdapterState::init(cfg);
  s.unflatten(ck.params);
  return s;
}

}  // namespace orthotune
