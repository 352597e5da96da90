#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>

#include <json.hpp>

#include "orthotune/common.hpp"
#include "orthotune/dcrc.hpp"

namespace orthotune {

/// Full run configuration. Parsing is strict: unknown keys are a hard error
/// so a misspelled field can never silently fall back to a default. Missing
/// keys take the documented defaults; d_s defaults to min(d_v, d_e)/2.
struct RunConfig {
  std::size_t d_v = 8;
  std::size_t d_e = 8;
  std::size_t q = 4;
  std::size_t L = 2;
  std::size_t m = 1;  // adapted matrices per layer (counting only; training uses 1)
  std::size_t k = 2;  // relation MLP depth
  RelationVariant relation_variant = RelationVariant::linear;
  Activation activation = Activation::relu;
  double alpha_init = 0.0;
  std::uint64_t seed = 42;
  std::size_t iterations = 200;
  std::size_t batch_size = 64;
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double tau = 0.07;
  std::size_t d_s = 0;  // 0 means auto: min(d_v, d_e)/2
  double noise_scale = 0.05;

  std::size_t blocks_image() const { return d_v / q; }
  std::size_t blocks_text() const { return d_e / q; }
  std::size_t slice_count() const { return blocks_image() + blocks_text(); }

  void validate() const {
    detail::require(d_v >= 1 && d_e >= 1 && q >= 1, "config: dimensions must be >= 1");
    detail::require(d_v % q == 0, "config: q must divide d_v");
    detail::require(d_e % q == 0, "config: q must divide d_e");
    detail::require(L >= 1, "config: L must be >= 1");
    detail::require(m >= 1, "config: m must be >= 1");
    detail::require(k >= 1, "config: k must be >= 1");
    detail::require(iterations >= 1, "config: iterations must be >= 1");
    detail::require(batch_size >= 2, "config: batch_size must be >= 2");
    detail::require(lr >= 0.0, "config: lr must be >= 0");
    detail::require(beta1 >= 0.0 && beta1 < 1.0, "config: beta1 must be in [0,1)");
    detail::require(beta2 >= 0.0 && beta2 < 1.0, "config: beta2 must be in [0,1)");
    detail::require(eps > 0.0, "config: eps must be > 0");
    detail::require(tau > 0.0, "config: tau must be > 0");
    detail::require(d_s >= 1, "config: d_s must be >= 1");
    detail::require(noise_scale >= 0.0, "config: noise_scale must be >= 0");
    detail::require(std::isfinite(alpha_init), "config: alpha_init must be finite");
  }
};

inline const char* to_string(RelationVariant v) {
  return v == RelationVariant::linear ? "linear" : "mlp";
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "relu";
}

inline RelationVariant relation_variant_from_string(const std::string& s) {
  if (s == "linear") return RelationVariant::linear;
  if (s == "mlp") return RelationVariant::mlp;
  throw contract_error("config: relation_variant must be 'linear' or 'mlp', got '" + s + "'");
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw contract_error("config: activation must be 'identity', 'relu' or 'tanh', got '" + s +
                       "'");
}

inline nlohmann::json to_json(const RunConfig& c) {
  return nlohmann::json{{"d_v", c.d_v},
                        {"d_e", c.d_e},
                        {"q", c.q},
                        {"L", c.L},
                        {"m", c.m},
                        {"k", c.k},
                        {"relation_variant", to_string(c.relation_variant)},
                        {"activation", to_string(c.activation)},
                        {"alpha_init", c.alpha_init},
                        {"seed", c.seed},
                        {"iterations", c.iterations},
                        {"batch_size", c.batch_size},
                        {"lr", c.lr},
                        {"beta1", c.beta1},
                        {"beta2", c.beta2},
                        {"eps", c.eps},
                        {"tau", c.tau},
                        {"d_s", c.d_s},
                        {"noise_scale", c.noise_scale}};
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  detail::require(j.is_object(), "config: top level must be a JSON object");
  static const std::set<std::string> known = {
      "d_v",  "d_e",        "q",          "L",     "m",     "k",
      "relation_variant",   "activation", "alpha_init",     "seed",
      "iterations",         "batch_size", "lr",    "beta1", "beta2",
      "eps",  "tau",        "d_s",        "noise_scale"};
  std::string unknown;
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  detail::require(unknown.empty(), "config: unknown keys: " + unknown);

  RunConfig c;
  auto get_size = [&](const char* key, std::size_t& out) {
    if (!j.contains(key)) return;
    detail::require(j[key].is_number_unsigned() || (j[key].is_number_integer() &&
                                                    j[key].get<std::int64_t>() >= 0),
                    std::string("config: '") + key + "' must be a nonnegative integer");
    out = j[key].get<std::size_t>();
  };
  auto get_double = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    detail::require(j[key].is_number(), std::string("config: '") + key + "' must be a number");
    out = j[key].get<double>();
  };

  get_size("d_v", c.d_v);
  get_size("d_e", c.d_e);
  get_size("q", c.q);
  get_size("L", c.L);
  get_size("m", c.m);
  get_size("k", c.k);
  if (j.contains("relation_variant")) {
    detail::require(j["relation_variant"].is_string(),
                    "config: 'relation_variant' must be a string");
    c.relation_variant = relation_variant_from_string(j["relation_variant"].get<std::string>());
  }
  if (j.contains("activation")) {
    detail::require(j["activation"].is_string(), "config: 'activation' must be a string");
    c.activation = activation_from_string(j["activation"].get<std::string>());
  }
  get_double("alpha_init", c.alpha_init);
  if (j.contains("seed")) {
    detail::require(j["seed"].is_number_unsigned() || (j["seed"].is_number_integer() &&
                                                       j["seed"].get<std::int64_t>() >= 0),
                    "config: 'seed' must be a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  get_size("iterations", c.iterations);
  get_size("batch_size", c.batch_size);
  get_double("lr", c.lr);
  get_double("beta1", c.beta1);
  get_double("beta2", c.beta2);
  get_double("eps", c.eps);
  get_double("tau", c.tau);
  get_size("d_s", c.d_s);
  get_double("noise_scale", c.noise_scale);

  if (c.d_s == 0) c.d_s = std::max<std::size_t>(1, std::min(c.d_v, c.d_e) / 2);
  c.validate();
  return c;
}

inline RunConfig config_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw contract_error(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

/// Stable content hash of the canonical serialized form; written into
/// reports so mismatched pairs are detected.
inline std::string config_hash(const RunConfig& c) {
  return detail::fnv1a_hex(to_json(c).dump());
}

/// Hash over the fields that determine checkpoint compatibility: everything
/// except the run length, so a checkpoint can seed a longer continuation of
/// the same model, data and optimizer.
inline std::string config_compat_hash(const RunConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("iterations");
  return detail::fnv1a_hex(j.dump());
}

}  // namespace orthotune
