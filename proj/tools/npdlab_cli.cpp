// Command-line harness over the library: instance generation, each pipeline
// stage as a standalone subcommand, replicated diagnostics, and full sweeps.
//
// Exit codes: 0 success, 1 validation/config error (bad flags, schema
// violations, unreadable inputs, refused guards), 2 runtime failure.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "npdlab/config.hpp"
#include "npdlab/dataset.hpp"
#include "npdlab/design.hpp"
#include "npdlab/diagnostics.hpp"
#include "npdlab/dp.hpp"
#include "npdlab/generators.hpp"
#include "npdlab/io.hpp"
#include "npdlab/mdp.hpp"
#include "npdlab/pipeline.hpp"
#include "npdlab/rng.hpp"
#include "npdlab/sparsify.hpp"
#include "npdlab/sweep.hpp"

namespace {

using nlohmann::json;
using namespace npdlab;

// Replicated diagnostics: each replicate rebuilds the offline side (and, for
// the model-difference checks, runs design and deployment) from its own
// derived stream, then evaluates one event statistic against its bound.
json load_diag_config(const std::string& path) { return load_json_file(path); }

struct DiagSetup {
  TabularMDP mdp;
  LoggingDistribution mu;
  PipelineConfig pipeline;
  std::int64_t replicates = 0;
  std::int64_t policies = 8;
  std::uint64_t seed = 0;
};

DiagSetup diag_setup_from_json(const json& j, std::uint64_t seed_override,
                               bool has_seed_override) {
  DiagSetup setup;
  setup.mdp = resolve_mdp_spec(detail::require_field<json>(j, "mdp", "diagnose config"));
  setup.mu = resolve_mu_spec(j.value("mu", json("uniform")), setup.mdp);
  setup.pipeline = pipeline_config_from_json(j);
  setup.pipeline.n_offline =
      detail::require_field<std::int64_t>(j, "n_offline", "diagnose config");
  setup.pipeline.k_design = j.value("k_design", std::int64_t{256});
  setup.pipeline.k_deploy = j.value("k_deploy", setup.pipeline.k_design);
  setup.replicates = detail::require_field<std::int64_t>(j, "replicates", "diagnose config");
  if (setup.replicates <= 0) throw ConfigError("diagnose: replicates must be positive");
  setup.policies = j.value("policies", std::int64_t{8});
  setup.seed = j.value("seed", std::uint64_t{0});
  if (has_seed_override) setup.seed = seed_override;
  return setup;
}

DeterministicPolicy random_augmented_policy(int horizon, int total_states,
                                            int num_actions, RngStream& rng) {
  DeterministicPolicy pi;
  pi.action.assign(horizon, std::vector<int>(total_states, 0));
  for (auto& row : pi.action) {
    for (int& a : row) a = static_cast<int>(rng.uniform_int(num_actions));
  }
  return pi;
}

std::vector<DiagRow> run_diagnose(const std::string& check, const DiagSetup& setup) {
  std::vector<DiagRow> rows;
  const TabularMDP& m = setup.mdp;
  const std::int64_t phi = resolve_phi(
      SparsifierConfig{setup.pipeline.delta, setup.pipeline.variant,
                       setup.pipeline.phi_override},
      m.horizon, m.num_states, m.num_actions);
  BonusParams bp{m.horizon, m.num_states, m.num_actions, setup.pipeline.delta};

  for (std::int64_t rep = 0; rep < setup.replicates; ++rep) {
    const RngSeed root =
        RngSeed{setup.seed, 0}.derive("diagnose", static_cast<std::uint64_t>(rep));
    DiagRow row;
    row.replicate = rep;

    if (check == "sandwich" || check == "visitation") {
      RngStream rng(root.derive("offline"));
      const OfflineDataset data = generate_offline_dataset(
          m, setup.mu, setup.pipeline.n_offline, rng, setup.pipeline.allocation);
      const CountTable counts = count_triples(data);
      const SparsifiedModel pop = sparsify_population(m, counts, phi);
      const SparsifiedModel emp =
          sparsify_empirical(counts, m.horizon, m.initial_state, phi);
      if (check == "sandwich") {
        const SandwichReport rep_s = check_multiplicative_accuracy(pop, emp);
        row.statistic = rep_s.statistic;
        row.bound = 1.0;
        row.pass = rep_s.holds;
      } else {
        RngStream prng(root.derive("policies"));
        std::vector<DeterministicPolicy> policies;
        for (std::int64_t i = 0; i < setup.policies; ++i) {
          policies.push_back(random_augmented_policy(m.horizon, m.num_states + 1,
                                                     m.num_actions, prng));
        }
        const VisitationReport rep_v = check_visitation_ratio(pop, emp, policies);
        row.statistic = rep_v.statistic;
        row.bound = 0.0;
        row.pass = rep_v.holds;
      }
    } else if (check == "kl" || check == "lemma1") {
      std::vector<RewardTable> rewards;
      {
        RngStream rrng(root.derive("rewards"));
        rewards.push_back(random_reward(m.num_states, m.num_actions, rrng));
      }
      const RunArtifacts art =
          rf_npd_end_to_end(m, setup.mu, setup.pipeline, rewards, root);
      const SparsifiedModel pop = sparsify_population(m, art.offline_counts, art.phi);
      if (check == "kl") {
        const KlReport rep_k = check_event_kl(art.fine, pop, art.online_counts, bp);
        row.statistic = rep_k.statistic;
        row.bound = 1.0;
        row.pass = rep_k.holds;
      } else {
        RngStream prng(root.derive("pairs"));
        std::vector<DeterministicPolicy> policies;
        std::vector<RewardTable> pair_rewards;
        for (std::int64_t i = 0; i < setup.policies; ++i) {
          policies.push_back(random_augmented_policy(m.horizon, m.num_states + 1,
                                                     m.num_actions, prng));
          pair_rewards.push_back(random_reward(m.num_states, m.num_actions, prng));
        }
        const Lemma1Report rep_l = check_lemma1(art.fine, art.online_counts, bp, pop,
                                                policies, pair_rewards);
        row.statistic = rep_l.fitted_c;
        row.bound = rep_l.reference_c;
        row.pass = rep_l.fitted_c <= rep_l.reference_c && rep_l.violations == 0;
      }
    } else {
      throw ConfigError("diagnose: unknown check \"" + check + "\"");
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular laboratory for reward-free non-reactive policy design"};
  app.require_subcommand(1);

  try {
    // ---------------------------------------------------------------- gen-mdp
    auto* gen_mdp = app.add_subcommand("gen-mdp", "Generate an MDP instance");
    std::string gm_config, gm_out, gm_reward_out;
    std::uint64_t gm_seed = 0;
    bool gm_has_seed = false;
    gen_mdp->add_option("--config", gm_config, "Instance spec JSON")->required();
    gen_mdp->add_option("--out", gm_out, "Output mdp.json")->required();
    gen_mdp->add_option("--reward-out", gm_reward_out,
                        "Also write the instance spec's \"reward\" entry here");
    gen_mdp->add_option("--seed", gm_seed, "Override the instance spec seed")
        ->each([&](const std::string&) { gm_has_seed = true; });
    gen_mdp->callback([&]() {
      json spec = load_json_file(gm_config);
      if (gm_has_seed) spec["seed"] = gm_seed;
      const TabularMDP m = resolve_mdp_spec(spec);
      write_json_file(gm_out, mdp_to_json(m));
      if (!gm_reward_out.empty()) {
        if (!spec.contains("reward")) {
          throw ConfigError("gen-mdp: --reward-out needs a \"reward\" entry in the instance spec");
        }
        write_json_file(gm_reward_out, reward_to_json(resolve_reward_spec(spec["reward"], m)));
      }
    });

    // ------------------------------------------------------------ gen-offline
    auto* gen_off = app.add_subcommand("gen-offline", "Sample an offline dataset");
    std::string go_mdp, go_mu = "uniform", go_out, go_counts_out, go_alloc = "iid";
    std::int64_t go_n = 0;
    std::uint64_t go_seed = 0;
    gen_off->add_option("--mdp", go_mdp, "mdp.json")->required();
    gen_off->add_option("--mu", go_mu,
                        "\"uniform\", \"uniform-reachable\" or a JSON file with {\"mu\":...}");
    gen_off->add_option("--n", go_n, "Number of samples")->required();
    gen_off->add_option("--seed", go_seed, "Root seed");
    gen_off->add_option("--allocation", go_alloc, "iid or deterministic");
    gen_off->add_option("--out", go_out, "Output .triples path")->required();
    gen_off->add_option("--counts-out", go_counts_out, "Also write counts JSON");
    gen_off->callback([&]() {
      const TabularMDP m = mdp_from_json(load_json_file(go_mdp));
      json mu_spec;
      if (go_mu == "uniform" || go_mu == "uniform-reachable") {
        mu_spec = go_mu;
      } else {
        mu_spec = json{{"type", "file"}, {"path", go_mu}};
      }
      const LoggingDistribution mu = resolve_mu_spec(mu_spec, m);
      const RngSeed seed = RngSeed{go_seed, 0}.derive("offline");
      RngStream rng(seed);
      const OfflineDataset data =
          generate_offline_dataset(m, mu, go_n, rng, allocation_from_name(go_alloc));
      json sidecar = {{"source", "offline"},
                      {"seed", go_seed},
                      {"stream", seed.stream},
                      {"mu", go_mu},
                      {"allocation", go_alloc},
                      {"mdp_hash", hash_hex(read_text_file(go_mdp))}};
      write_dataset(go_out, data, sidecar);
      if (!go_counts_out.empty()) {
        write_json_file(go_counts_out, counts_to_json(count_triples(data)));
      }
    });

    // ---------------------------------------------------------------- sparsify
    auto* sparsify = app.add_subcommand("sparsify", "Build a sparsified model");
    std::string sp_kind, sp_mdp, sp_offline, sp_online, sp_variant = "horizon-log", sp_out;
    double sp_delta = 0.1;
    std::int64_t sp_phi = -1;
    sparsify->add_option("--kind", sp_kind, "population, empirical or fine")->required();
    sparsify->add_option("--mdp", sp_mdp, "mdp.json (kernel used only for population)")
        ->required();
    sparsify->add_option("--offline", sp_offline, "Offline .triples")->required();
    sparsify->add_option("--online", sp_online, "Online .triples (fine only)");
    sparsify->add_option("--delta", sp_delta, "Failure probability");
    sparsify->add_option("--variant", sp_variant, "horizon-log or flat-log");
    sparsify->add_option("--phi", sp_phi, "Threshold override (>= 0)");
    sparsify->add_option("--out", sp_out, "Output model JSON")->required();
    sparsify->callback([&]() {
      const TabularMDP m = mdp_from_json(load_json_file(sp_mdp));
      const CountTable offline =
          count_triples(read_dataset(sp_offline, m.num_states, m.num_actions));
      SparsifierConfig cfg{sp_delta, variant_from_name(sp_variant), sp_phi};
      const std::int64_t phi = resolve_phi(cfg, m.horizon, m.num_states, m.num_actions);
      SparsifiedModel model;
      if (sp_kind == "population") {
        model = sparsify_population(m, offline, phi);
      } else if (sp_kind == "empirical") {
        model = sparsify_empirical(offline, m.horizon, m.initial_state, phi);
      } else if (sp_kind == "fine") {
        if (sp_online.empty()) throw ConfigError("sparsify: fine needs --online");
        const CountTable online =
            count_triples(read_dataset(sp_online, m.num_states, m.num_actions));
        model = sparsify_fine_estimated(offline, online, m.horizon, m.initial_state, phi);
      } else {
        throw ConfigError("sparsify: unknown kind \"" + sp_kind + "\"");
      }
      write_json_file(sp_out, model_to_json(model));
    });

    // ------------------------------------------------------------------ design
    auto* design = app.add_subcommand("design", "Design the exploration mixture");
    std::string dg_model, dg_out, dg_trace;
    std::int64_t dg_episodes = 0;
    double dg_delta = 0.1;
    bool dg_pin = false;
    std::uint64_t dg_seed = 0;
    design->add_option("--model", dg_model, "Empirical model JSON")->required();
    design->add_option("--episodes", dg_episodes, "Virtual episode budget")->required();
    design->add_option("--delta", dg_delta, "Failure probability");
    design->add_flag("--pin-absorbing", dg_pin, "Pin sink uncertainty to zero");
    design->add_option("--seed", dg_seed, "Root seed");
    design->add_option("--out", dg_out, "Output mixture JSON")->required();
    design->add_option("--trace", dg_trace, "Optional per-episode trace CSV");
    design->callback([&]() {
      const SparsifiedModel model = model_from_json(load_json_file(dg_model));
      DesignerConfig cfg{dg_episodes, dg_delta, dg_pin};
      const DesignResult res = rf_ucb(model, cfg, RngSeed{dg_seed, 0}.derive("design"));
      write_json_file(dg_out, mixture_to_json(res.mixture));
      if (!dg_trace.empty()) write_text_atomic(dg_trace, trace_to_csv(res.trace));
    });

    // ------------------------------------------------------------------ deploy
    auto* deploy = app.add_subcommand("deploy", "Deploy a mixture on the true MDP");
    std::string dp_mdp, dp_mix, dp_out;
    std::int64_t dp_episodes = 0;
    std::uint64_t dp_seed = 0;
    deploy->add_option("--mdp", dp_mdp, "mdp.json")->required();
    deploy->add_option("--mixture", dp_mix, "Mixture JSON")->required();
    deploy->add_option("--episodes", dp_episodes, "Online episode budget")->required();
    deploy->add_option("--seed", dp_seed, "Root seed");
    deploy->add_option("--out", dp_out, "Output .triples path")->required();
    deploy->callback([&]() {
      const TabularMDP m = mdp_from_json(load_json_file(dp_mdp));
      const MixturePolicy mix = mixture_from_json(load_json_file(dp_mix));
      const RngSeed seed = RngSeed{dp_seed, 0}.derive("deploy");
      const DeploymentLog log = deploy_online(m, mix, dp_episodes, seed);
      json sidecar = {{"source", "online"},
                      {"seed", dp_seed},
                      {"stream", seed.stream},
                      {"episodes", dp_episodes},
                      {"mixture_fingerprint", hex64(mixture_fingerprint(mix))},
                      {"mdp_hash", hash_hex(read_text_file(dp_mdp))}};
      write_dataset(dp_out, log.data, sidecar);
    });

    // -------------------------------------------------------------------- plan
    auto* plan = app.add_subcommand("plan", "Plan the final policy for one reward");
    std::string pl_model, pl_reward, pl_out;
    plan->add_option("--model", pl_model, "Fine-estimated model JSON")->required();
    plan->add_option("--reward", pl_reward, "reward.json")->required();
    plan->add_option("--out", pl_out, "Output policy JSON")->required();
    plan->callback([&]() {
      const SparsifiedModel model = model_from_json(load_json_file(pl_model));
      const RewardTable reward = reward_from_json(load_json_file(pl_reward),
                                                  model.num_states, model.num_actions);
      const PlanResult res = plan_final(model, reward);
      write_json_file(pl_out, policy_to_json(res.policy));
    });

    // ---------------------------------------------------------------- evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Oracle-evaluate a final policy");
    std::string ev_mdp, ev_offline, ev_reward, ev_policy, ev_variant = "horizon-log", ev_out;
    double ev_delta = 0.1;
    std::int64_t ev_phi = -1;
    evaluate->add_option("--mdp", ev_mdp, "mdp.json")->required();
    evaluate->add_option("--offline", ev_offline, "Offline .triples")->required();
    evaluate->add_option("--reward", ev_reward, "reward.json")->required();
    evaluate->add_option("--policy", ev_policy, "Final policy JSON")->required();
    evaluate->add_option("--delta", ev_delta, "Failure probability");
    evaluate->add_option("--variant", ev_variant, "horizon-log or flat-log");
    evaluate->add_option("--phi", ev_phi, "Threshold override (>= 0)");
    evaluate->add_option("--out", ev_out, "Output eval CSV")->required();
    evaluate->callback([&]() {
      const TabularMDP m = mdp_from_json(load_json_file(ev_mdp));
      const CountTable counts =
          count_triples(read_dataset(ev_offline, m.num_states, m.num_actions));
      const RewardTable reward =
          reward_from_json(load_json_file(ev_reward), m.num_states, m.num_actions);
      DeterministicPolicy pi = policy_from_json(load_json_file(ev_policy));
      try {
        validate_policy(pi, m.horizon, m.num_states, m.num_actions);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("evaluate: ") + e.what());
      }
      SparsifierConfig cfg{ev_delta, variant_from_name(ev_variant), ev_phi};
      const std::int64_t phi = resolve_phi(cfg, m.horizon, m.num_states, m.num_actions);
      const EvalReport rep = evaluate_suboptimality(m, counts, phi, reward, pi);
      write_text_atomic(ev_out, eval_to_csv({{0, rep}}));
    });

    // ---------------------------------------------------------------- diagnose
    auto* diagnose = app.add_subcommand("diagnose", "Replicated event diagnostics");
    std::string di_check, di_config, di_out;
    std::uint64_t di_seed = 0;
    bool di_has_seed = false;
    diagnose->add_option("--check", di_check, "sandwich, visitation, kl or lemma1")
        ->required();
    diagnose->add_option("--config", di_config, "Diagnose config JSON")->required();
    diagnose->add_option("--seed", di_seed, "Override the config seed")
        ->each([&](const std::string&) { di_has_seed = true; });
    diagnose->add_option("--out", di_out, "Output CSV")->required();
    diagnose->callback([&]() {
      const DiagSetup setup =
          diag_setup_from_json(load_diag_config(di_config), di_seed, di_has_seed);
      write_text_atomic(di_out, diag_to_csv(run_diagnose(di_check, setup)));
    });

    // -------------------------------------------------------------- experiment
    auto* experiment = app.add_subcommand("experiment", "Run a sweep");
    std::string ex_config, ex_out;
    int ex_jobs = 0;
    bool ex_resume = false;
    std::uint64_t ex_seed = 0;
    bool ex_has_seed = false;
    experiment->add_option("--config", ex_config, "Experiment spec JSON")->required();
    experiment->add_option("--out", ex_out, "Output directory")->required();
    experiment->add_option("--jobs", ex_jobs, "Worker threads (or env NPD_LAB_JOBS)");
    experiment->add_flag("--resume", ex_resume, "Skip cells recorded in the manifest");
    experiment->add_option("--seed", ex_seed, "Override the config master_seed")
        ->each([&](const std::string&) { ex_has_seed = true; });
    experiment->callback([&]() {
      json spec_json = load_json_file(ex_config);
      if (ex_has_seed) spec_json["master_seed"] = ex_seed;
      const ExperimentSpec spec = experiment_from_json(spec_json);
      run_sweep(spec, ex_out, ex_jobs, ex_resume);
    });

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return 1;
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
