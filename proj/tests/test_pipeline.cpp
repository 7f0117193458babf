#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "npdlab/dataset.hpp"
#include "npdlab/design.hpp"
#include "npdlab/generators.hpp"
#include "npdlab/pipeline.hpp"
#include "npdlab/sparsify.hpp"

using namespace npdlab;

namespace {

MixturePolicy two_member_mixture() {
  MixturePolicy mix;
  mix.members.push_back(DeterministicPolicy{{{0, 0}, {0, 0}}});
  mix.members.push_back(DeterministicPolicy{{{1, 1}, {1, 1}}});
  return mix;
}

}  // namespace

TEST_CASE("deployment pools one row per step and logs the member draws") {
  RngStream gen(RngSeed{1001, 0});
  const TabularMDP truth = random_mdp(2, 2, 2, gen);
  const MixturePolicy mix = two_member_mixture();

  const std::int64_t episodes = 10000;
  const DeploymentLog log = deploy_online(truth, mix, episodes, RngSeed{1001, 1});
  CHECK(static_cast<std::int64_t>(log.data.triples.size()) == episodes * truth.horizon);
  CHECK(static_cast<std::int64_t>(log.member_index.size()) == episodes);

  // Members are drawn uniformly: 5 sigma band around one half.
  std::int64_t ones = 0;
  for (int m : log.member_index) ones += m;
  const double sigma = std::sqrt(0.25 / double(episodes));
  CHECK(std::abs(double(ones) / double(episodes) - 0.5) <= 5.0 * sigma);

  // Every logged action matches the drawn member's table (constant policies
  // make that easy to assert).
  for (std::int64_t e = 0; e < episodes; ++e) {
    for (int h = 0; h < truth.horizon; ++h) {
      REQUIRE(log.data.triples[e * truth.horizon + h].a == log.member_index[e]);
    }
  }

  CHECK_THROWS_AS(deploy_online(truth, MixturePolicy{}, 10, RngSeed{1, 0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(deploy_online(truth, mix, -1, RngSeed{1, 0}), std::invalid_argument);
}

TEST_CASE("planning on an all-sink model maximizes the first-step reward") {
  // With no online visits anywhere, every row of the fine model is a sink
  // point mass, so only the immediate reward at the initial state matters.
  const CountTable none = empty_counts(3, 3);
  const SparsifiedModel fine = sparsify_fine_estimated(none, none, 2, 0, 10);
  RewardTable reward{{{0.3, 0.8, 0.55}, {0.1, 0.2, 0.3}, {0.9, 0.9, 0.9}}};

  const PlanResult plan = plan_final(fine, reward);
  CHECK(plan.policy.action[0][0] == 1);
  CHECK(plan.values.V[0][0] == Catch::Approx(0.8).margin(1e-15));

  // A zero reward makes every plan worthless and the all-zero policy optimal.
  RewardTable zero{{std::vector<double>(3, 0.0), std::vector<double>(3, 0.0),
                    std::vector<double>(3, 0.0)}};
  const PlanResult flat = plan_final(fine, zero);
  CHECK(flat.values.V[0][0] == 0.0);
  for (const auto& row : flat.policy.action) {
    for (int a : row) CHECK(a == 0);
  }
}

TEST_CASE("planner matches exhaustive enumeration on the fine model") {
  RngStream gen(RngSeed{2718, 0});
  const TabularMDP truth = random_mdp(3, 2, 2, gen);
  const OfflineDataset off =
      generate_offline_dataset(truth, uniform_logging(3, 2), 5000, gen);
  const CountTable offline_counts = count_triples(off);
  MixturePolicy mix;
  mix.members.push_back(DeterministicPolicy{{{0, 0, 0}, {0, 0, 0}}});
  mix.members.push_back(DeterministicPolicy{{{1, 1, 1}, {1, 1, 1}}});
  const DeploymentLog log = deploy_online(truth, mix, 2000, RngSeed{2718, 1});
  const SparsifiedModel fine =
      sparsify_fine_estimated(offline_counts, count_triples(log.data), 2, 0, 20);
  const RewardTable reward = random_reward(3, 2, gen);

  const PlanResult plan = plan_final(fine, reward);
  const RewardMatrix padded = sparsify_reward(reward, 3, 2);
  const EnumerationResult brute =
      enumerate_policies_oracle(fine.kernel, padded, fine.horizon, fine.initial_state);
  CHECK(std::abs(plan.values.V[0][0] - brute.best_value) <= 1e-9);
}

TEST_CASE("evaluation reports zero gap for the optimal policy") {
  RngStream gen(RngSeed{555, 0});
  const TabularMDP truth = random_mdp(3, 2, 3, gen);
  const RewardTable reward = random_reward(3, 2, gen);
  const OfflineDataset off =
      generate_offline_dataset(truth, uniform_logging(3, 2), 3000, gen);
  const CountTable counts = count_triples(off);
  const std::int64_t phi = 5;

  // The population model's own optimizer has gap_dag exactly zero.
  const SparsifiedModel pop = sparsify_population(truth, counts, phi);
  const RewardMatrix r_dag = sparsify_reward(reward, 3, 2);
  const DeterministicPolicy pi_dag =
      value_iteration_optimal(pop.kernel, r_dag, pop.horizon).policy;
  const EvalReport rep = evaluate_suboptimality(truth, counts, phi, reward, pi_dag);
  CHECK(rep.gap_dag == Catch::Approx(0.0).margin(1e-12));
  CHECK(rep.v_dag_opt <= rep.v_true_opt + 1e-9);

  // The true optimizer has gap_true exactly zero.
  const DeterministicPolicy pi_star =
      value_iteration_optimal(truth.kernel, reward.r, truth.horizon).policy;
  const EvalReport star = evaluate_suboptimality(truth, counts, phi, reward, pi_star);
  CHECK(star.gap_true == Catch::Approx(0.0).margin(1e-12));
  CHECK(star.gap_dag >= -1e-12);
}

TEST_CASE("end-to-end run wires the phases together") {
  RngStream gen(RngSeed{999, 0});
  const TabularMDP truth = random_mdp(3, 2, 3, gen);
  const LoggingDistribution mu = uniform_logging(3, 2);
  std::vector<RewardTable> rewards = {random_reward(3, 2, gen), random_reward(3, 2, gen)};

  PipelineConfig cfg;
  cfg.n_offline = 5000;
  cfg.k_design = 64;
  cfg.k_deploy = 128;
  cfg.phi_override = 10;

  const RunArtifacts art = rf_npd_end_to_end(truth, mu, cfg, rewards, RngSeed{999, 1});
  CHECK(art.phi == 10);
  CHECK(static_cast<std::int64_t>(art.offline.triples.size()) == cfg.n_offline);
  CHECK(art.design.mixture.members.size() == 64);
  CHECK(static_cast<std::int64_t>(art.online.data.triples.size()) ==
        cfg.k_deploy * truth.horizon);
  CHECK(art.pi_ex_fingerprint == mixture_fingerprint(art.design.mixture));
  REQUIRE(art.pi_final.size() == 2);
  REQUIRE(art.eval.size() == 2);
  for (const auto& rep : art.eval) {
    CHECK(rep.gap_dag >= -1e-9);
    CHECK(rep.v_dag_opt <= rep.v_true_opt + 1e-9);
  }

  // Planned policies carry the sink column.
  for (const auto& pi : art.pi_final) {
    REQUIRE(pi.action.size() == static_cast<std::size_t>(truth.horizon));
    for (const auto& row : pi.action) REQUIRE(row.size() == 4);
  }
}

TEST_CASE("the exploration phase is shared across rewards") {
  RngStream gen(RngSeed{777, 0});
  const TabularMDP truth = random_mdp(3, 2, 2, gen);
  const LoggingDistribution mu = uniform_logging(3, 2);
  const RewardTable r1 = random_reward(3, 2, gen);
  const RewardTable r2 = random_reward(3, 2, gen);

  PipelineConfig cfg;
  cfg.n_offline = 2000;
  cfg.k_design = 32;
  cfg.k_deploy = 64;
  cfg.phi_override = 8;

  const RngSeed root{777, 1};
  const RunArtifacts both = rf_npd_end_to_end(truth, mu, cfg, {r1, r2}, root);
  const RunArtifacts only_r1 = rf_npd_end_to_end(truth, mu, cfg, {r1}, root);
  const RunArtifacts only_r2 = rf_npd_end_to_end(truth, mu, cfg, {r2}, root);

  // Identical data and mixture no matter which rewards are requested.
  CHECK(both.pi_ex_fingerprint == only_r1.pi_ex_fingerprint);
  CHECK(both.pi_ex_fingerprint == only_r2.pi_ex_fingerprint);
  CHECK(both.online_counts.n_sas == only_r1.online_counts.n_sas);
  CHECK(both.online_counts.n_sas == only_r2.online_counts.n_sas);

  // Per-reward outputs agree with the single-reward runs.
  CHECK(both.pi_final[0].action == only_r1.pi_final[0].action);
  CHECK(both.pi_final[1].action == only_r2.pi_final[0].action);
  CHECK(both.eval[0].gap_dag == only_r1.eval[0].gap_dag);
  CHECK(both.eval[1].gap_dag == only_r2.eval[0].gap_dag);
}

TEST_CASE("repeated runs with one seed are identical, different seeds differ") {
  RngStream gen(RngSeed{31415, 0});
  const TabularMDP truth = random_mdp(3, 2, 2, gen);
  const LoggingDistribution mu = uniform_logging(3, 2);
  const std::vector<RewardTable> rewards = {random_reward(3, 2, gen)};

  PipelineConfig cfg;
  cfg.n_offline = 1000;
  cfg.k_design = 32;
  cfg.k_deploy = 32;
  cfg.phi_override = 6;

  const RunArtifacts a = rf_npd_end_to_end(truth, mu, cfg, rewards, RngSeed{31415, 1});
  const RunArtifacts b = rf_npd_end_to_end(truth, mu, cfg, rewards, RngSeed{31415, 1});
  CHECK(a.pi_ex_fingerprint == b.pi_ex_fingerprint);
  CHECK(a.offline_counts.n_sas == b.offline_counts.n_sas);
  CHECK(a.online_counts.n_sas == b.online_counts.n_sas);
  CHECK(a.eval[0].gap_dag == b.eval[0].gap_dag);
  CHECK(a.eval[0].gap_true == b.eval[0].gap_true);

  const RunArtifacts c = rf_npd_end_to_end(truth, mu, cfg, rewards, RngSeed{31415, 2});
  CHECK(a.offline_counts.n_sas != c.offline_counts.n_sas);
}
