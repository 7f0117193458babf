#pragma once

// Config-to-object resolution shared by the CLI and the sweep runner.
//
// Specs are small JSON objects:
//   mdp:    {"type":"random","num_states":..,"num_actions":..,"horizon":..,
//            "initial_state":0,"seed":0}
//           {"type":"gridworld","width":..,"height":..,"horizon":..,
//            "slip":0.1,"start_cell":0}
//           {"type":"file","path":"mdp.json"}
//   reward: {"type":"random","seed":0} | {"type":"table","r":[[..]]}
//           | {"type":"file","path":"reward.json"}
//   mu:     "uniform" | "uniform-reachable" | {"mu":[[..]]}
//           | {"type":"file","path":"mu.json"}
// Generator seeds are independent of run seeds: each draws from its own
// phase-tagged stream, so the same spec always produces the same instance.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "npdlab/dataset.hpp"
#include "npdlab/generators.hpp"
#include "npdlab/io.hpp"
#include "npdlab/mdp.hpp"
#include "npdlab/pipeline.hpp"
#include "npdlab/rng.hpp"
#include "npdlab/sparsify.hpp"

namespace npdlab {

inline TabularMDP resolve_mdp_spec(const nlohmann::json& spec,
                                   const std::filesystem::path& base_dir = ".") {
  const std::string type = detail::require_field<std::string>(spec, "type", "mdp spec");
  if (type == "file") {
    const auto path = detail::require_field<std::string>(spec, "path", "mdp spec");
    return mdp_from_json(load_json_file(base_dir / path));
  }
  if (type == "random") {
    const int ns = detail::require_field<int>(spec, "num_states", "mdp spec");
    const int na = detail::require_field<int>(spec, "num_actions", "mdp spec");
    const int horizon = detail::require_field<int>(spec, "horizon", "mdp spec");
    const int initial = spec.value("initial_state", 0);
    const std::uint64_t seed = spec.value("seed", 0ull);
    RngStream rng(RngSeed{seed, 0}.derive("mdp-gen"));
    try {
      return random_mdp(ns, na, horizon, rng, initial);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("mdp spec: ") + e.what());
    }
  }
  if (type == "gridworld") {
    GridworldConfig cfg;
    cfg.width = detail::require_field<int>(spec, "width", "mdp spec");
    cfg.height = detail::require_field<int>(spec, "height", "mdp spec");
    cfg.horizon = detail::require_field<int>(spec, "horizon", "mdp spec");
    cfg.slip = spec.value("slip", 0.1);
    cfg.start_cell = spec.value("start_cell", 0);
    try {
      return gridworld(cfg);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("mdp spec: ") + e.what());
    }
  }
  throw ConfigError("mdp spec: unknown type \"" + type + "\"");
}

inline RewardTable resolve_reward_spec(const nlohmann::json& spec, const TabularMDP& m,
                                       const std::filesystem::path& base_dir = ".") {
  const std::string type =
      detail::require_field<std::string>(spec, "type", "reward spec");
  if (type == "file") {
    const auto path = detail::require_field<std::string>(spec, "path", "reward spec");
    return reward_from_json(load_json_file(base_dir / path), m.num_states, m.num_actions);
  }
  if (type == "table") {
    return reward_from_json(spec, m.num_states, m.num_actions);
  }
  if (type == "random") {
    const std::uint64_t seed = spec.value("seed", 0ull);
    RngStream rng(RngSeed{seed, 0}.derive("reward-gen"));
    return random_reward(m.num_states, m.num_actions, rng);
  }
  throw ConfigError("reward spec: unknown type \"" + type + "\"");
}

inline LoggingDistribution resolve_mu_spec(const nlohmann::json& spec,
                                           const TabularMDP& m,
                                           const std::filesystem::path& base_dir = ".") {
  nlohmann::json body = spec;
  if (body.is_object() && body.value("type", "") == std::string("file")) {
    const auto path = detail::require_field<std::string>(body, "path", "mu spec");
    body = load_json_file(base_dir / path);
  }
  if (body.is_string()) {
    const std::string name = body.get<std::string>();
    if (name == "uniform") return uniform_logging(m.num_states, m.num_actions);
    if (name == "uniform-reachable") return reachable_logging(m);
    throw ConfigError("mu spec: unknown name \"" + name + "\"");
  }
  LoggingDistribution mu;
  mu.mu = detail::require_field<std::vector<std::vector<double>>>(body, "mu", "mu spec");
  try {
    validate_logging(mu, m.num_states, m.num_actions);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mu spec: ") + e.what());
  }
  return mu;
}

inline ThresholdVariant variant_from_name(const std::string& name) {
  if (name == "horizon-log") return ThresholdVariant::horizon_log;
  if (name == "flat-log") return ThresholdVariant::flat_log;
  throw ConfigError("threshold_variant must be \"horizon-log\" or \"flat-log\"");
}

inline AllocationMode allocation_from_name(const std::string& name) {
  if (name == "iid") return AllocationMode::iid;
  if (name == "deterministic") return AllocationMode::deterministic;
  throw ConfigError("allocation must be \"iid\" or \"deterministic\"");
}

// Shared pipeline knobs; grid axes (n_offline, k) are filled in per cell.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig cfg;
  cfg.delta = j.value("delta", 0.1);
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    throw ConfigError("delta must be in (0,1)");
  }
  cfg.variant = variant_from_name(j.value("threshold_variant", "horizon-log"));
  cfg.phi_override = j.value("phi_override", std::int64_t{-1});
  cfg.pin_absorbing_to_zero = j.value("pin_absorbing_to_zero", false);
  cfg.allocation = allocation_from_name(j.value("allocation", "iid"));
  return cfg;
}

}  // namespace npdlab
