#pragma once

// End-to-end protocol: offline data -> empirical sparsified model -> designed
// exploration mixture -> one non-reactive online deployment on the true MDP ->
// fine-estimated model -> pessimistic planning per reward -> evaluation.
//
// The true MDP appears in exactly two roles: sampling episodes during the
// online phase, and the oracle evaluation of the final policies.  The designer
// and planner only ever see sparsified models.  Each phase draws from its own
// derived RNG stream ("offline", "design", "deploy"), so phases are
// individually replayable; the mixture fingerprint is recorded before the
// deployment and re-checked afterwards as a non-reactivity witness.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "npdlab/dataset.hpp"
#include "npdlab/design.hpp"
#include "npdlab/dp.hpp"
#include "npdlab/mdp.hpp"
#include "npdlab/rng.hpp"
#include "npdlab/sparsify.hpp"

namespace npdlab {

/** Online phase output: the pooled triples plus the member drawn per episode. */
struct DeploymentLog {
  OfflineDataset data;
  std::vector<int> member_index;
};

// Runs the mixture for `episodes` episodes on the true MDP.  One member is
// drawn uniformly at the start of each episode and followed for all H steps.
inline DeploymentLog deploy_online(const TabularMDP& truth, const MixturePolicy& mix,
                                   std::int64_t episodes, RngSeed seed) {
  validate_mdp(truth);
  if (mix.members.empty()) throw std::invalid_argument("deploy_online: empty mixture");
  if (episodes < 0) throw std::invalid_argument("deploy_online: negative episode count");
  for (const auto& member : mix.members) {
    validate_policy(member, truth.horizon, truth.num_states, truth.num_actions);
  }

  RngStream rng(seed);
  DeploymentLog log;
  log.data.num_states = truth.num_states;
  log.data.num_actions = truth.num_actions;
  log.data.triples.reserve(static_cast<std::size_t>(episodes) * truth.horizon);
  log.member_index.reserve(static_cast<std::size_t>(episodes));
  for (std::int64_t e = 0; e < episodes; ++e) {
    const int member = static_cast<int>(rng.uniform_int(mix.members.size()));
    log.member_index.push_back(member);
    const Episode ep = sample_episode(truth, mix.members[member], rng);
    for (int h = 0; h < truth.horizon; ++h) {
      log.data.triples.push_back({ep.states[h], ep.actions[h], ep.states[h + 1]});
    }
  }
  return log;
}

struct PlanResult {
  DeterministicPolicy policy;  // H x (S+1); sink column present
  ValueTable values;
};

// Bellman-optimal policy on the fine-estimated model with the sink-padded
// reward.  Routing unknown mass to a zero-reward sink is what makes the plan
// pessimistic about unexplored transitions.
inline PlanResult plan_final(const SparsifiedModel& fine, const RewardTable& reward) {
  validate_sparsified(fine);
  const RewardMatrix r = sparsify_reward(reward, fine.num_states, fine.num_actions);
  OptimalPlan plan = value_iteration_optimal(fine.kernel, r, fine.horizon);
  return {std::move(plan.policy), std::move(plan.values)};
}

/**
 * Oracle evaluation of a final policy.  The reference model is the population
 * sparsified MDP built from the same offline counts the learner saw, so the
 * gap column matches the quantity the design phase drives down; values on the
 * raw MDP are reported alongside.
 */
struct EvalReport {
  double v_dag_opt = 0.0;    // optimal value on the population sparsified model
  double v_dag_final = 0.0;  // final policy's value on that model
  double gap_dag = 0.0;      // v_dag_opt - v_dag_final
  double v_true_opt = 0.0;   // optimal value on the true MDP
  double v_true_final = 0.0; // final policy's value on the true MDP
  double gap_true = 0.0;     // v_true_opt - v_true_final
};

inline EvalReport evaluate_suboptimality(const TabularMDP& truth,
                                         const CountTable& offline_counts,
                                         std::int64_t phi, const RewardTable& reward,
                                         const DeterministicPolicy& pi_final) {
  validate_mdp(truth);
  validate_reward(reward, truth.num_states, truth.num_actions);
  validate_policy(pi_final, truth.horizon, truth.num_states, truth.num_actions);

  const SparsifiedModel pop = sparsify_population(truth, offline_counts, phi);
  const RewardMatrix r_dag = sparsify_reward(reward, truth.num_states, truth.num_actions);

  // A policy planned on a raw-width model gets action 0 at the sink, where
  // every action is equivalent.
  DeterministicPolicy padded = pi_final;
  for (auto& row : padded.action) row.resize(pop.total_states(), 0);
  validate_policy(padded, truth.horizon, pop.total_states(), pop.num_actions);

  EvalReport rep;
  rep.v_dag_opt =
      value_iteration_optimal(pop.kernel, r_dag, pop.horizon).values.V[0][pop.initial_state];
  rep.v_dag_final =
      policy_value(pop.kernel, r_dag, pop.horizon, pop.initial_state, padded);
  rep.gap_dag = rep.v_dag_opt - rep.v_dag_final;
  rep.v_true_opt = value_iteration_optimal(truth.kernel, reward.r, truth.horizon)
                       .values.V[0][truth.initial_state];
  rep.v_true_final =
      policy_value(truth.kernel, reward.r, truth.horizon, truth.initial_state, pi_final);
  rep.gap_true = rep.v_true_opt - rep.v_true_final;
  return rep;
}

struct PipelineConfig {
  std::int64_t n_offline = 0;
  std::int64_t k_design = 0;
  std::int64_t k_deploy = 0;
  double delta = 0.1;
  ThresholdVariant variant = ThresholdVariant::horizon_log;
  std::int64_t phi_override = -1;
  bool pin_absorbing_to_zero = false;
  AllocationMode allocation = AllocationMode::iid;
};

struct RunArtifacts {
  std::int64_t phi = 0;
  OfflineDataset offline;
  CountTable offline_counts;
  SparsifiedModel empirical;
  DesignResult design;
  std::uint64_t pi_ex_fingerprint = 0;
  DeploymentLog online;
  CountTable online_counts;
  SparsifiedModel fine;
  std::vector<DeterministicPolicy> pi_final;  // one per reward
  std::vector<EvalReport> eval;               // one per reward
};

// One full run.  `rewards` may hold any number of reward tables; the offline
// and online phases run once regardless (the protocol is reward-free), and
// only the planning and evaluation stages repeat per reward.
inline RunArtifacts rf_npd_end_to_end(const TabularMDP& truth,
                                      const LoggingDistribution& mu,
                                      const PipelineConfig& cfg,
                                      const std::vector<RewardTable>& rewards,
                                      RngSeed root) {
  validate_mdp(truth);
  if (rewards.empty()) {
    throw std::invalid_argument("rf_npd_end_to_end: at least one reward required");
  }
  for (const auto& rw : rewards) validate_reward(rw, truth.num_states, truth.num_actions);

  RunArtifacts art;

  RngStream offline_rng(root.derive("offline"));
  art.offline =
      generate_offline_dataset(truth, mu, cfg.n_offline, offline_rng, cfg.allocation);
  art.offline_counts = count_triples(art.offline);

  SparsifierConfig scfg;
  scfg.delta = cfg.delta;
  scfg.variant = cfg.variant;
  scfg.phi_override = cfg.phi_override;
  art.phi = resolve_phi(scfg, truth.horizon, truth.num_states, truth.num_actions);
  art.empirical = sparsify_empirical(art.offline_counts, truth.horizon,
                                     truth.initial_state, art.phi);

  DesignerConfig dcfg;
  dcfg.episodes = cfg.k_design;
  dcfg.delta = cfg.delta;
  dcfg.pin_absorbing_to_zero = cfg.pin_absorbing_to_zero;
  art.design = rf_ucb(art.empirical, dcfg, root.derive("design"));
  art.pi_ex_fingerprint = mixture_fingerprint(art.design.mixture);

  art.online = deploy_online(truth, art.design.mixture, cfg.k_deploy, root.derive("deploy"));
  if (mixture_fingerprint(art.design.mixture) != art.pi_ex_fingerprint) {
    throw std::runtime_error("rf_npd_end_to_end: mixture changed during deployment");
  }
  art.online_counts = count_triples(art.online.data);
  art.fine = sparsify_fine_estimated(art.offline_counts, art.online_counts,
                                     truth.horizon, truth.initial_state, art.phi);

  art.pi_final.reserve(rewards.size());
  art.eval.reserve(rewards.size());
  for (const auto& rw : rewards) {
    PlanResult plan = plan_final(art.fine, rw);
    art.eval.push_back(
        evaluate_suboptimality(truth, art.offline_counts, art.phi, rw, plan.policy));
    art.pi_final.push_back(std::move(plan.policy));
  }
  return art;
}

}  // namespace npdlab
