#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "npdlab/dataset.hpp"
#include "npdlab/generators.hpp"
#include "npdlab/io.hpp"
#include "npdlab/pipeline.hpp"
#include "npdlab/rng.hpp"
#include "npdlab/sparsify.hpp"

using namespace npdlab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("npdlab_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("content hashes match frozen reference values") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("abc") == 16654208175385433931ull);
  CHECK(fnv1a64("0 1 2\n") == 14204890759275684144ull);
  CHECK(hash_hex("abc") == hex64(16654208175385433931ull));
  CHECK(hex64(0) == "0000000000000000");
  CHECK(hex64(14695981039346656037ull) == "cbf29ce484222325");
}

TEST_CASE("fixed-width float formatting round-trips exactly") {
  for (double v : {0.5, 1.0 / 3.0, 1e-17, 123456.789, -0.0, 2e300}) {
    CHECK(std::stod(fmt_double(v)) == v);
  }
  CHECK(fmt_double(0.5) == "0.5");
}

TEST_CASE("atomic writes leave no temporary behind") {
  const fs::path dir = fresh_dir("atomic");
  const fs::path target = dir / "out.txt";
  write_text_atomic(target, "payload");
  CHECK(read_text_file(target) == "payload");
  CHECK_FALSE(fs::exists(dir / "out.txt.tmp"));
  CHECK_THROWS_AS(read_text_file(dir / "missing.txt"), ConfigError);
}

TEST_CASE("mdp json round trip preserves the instance") {
  RngStream gen(RngSeed{8100, 0});
  const TabularMDP m = random_mdp(3, 2, 4, gen);
  const TabularMDP back = mdp_from_json(mdp_to_json(m));
  CHECK(back.num_states == m.num_states);
  CHECK(back.num_actions == m.num_actions);
  CHECK(back.horizon == m.horizon);
  CHECK(back.initial_state == m.initial_state);
  CHECK(back.kernel == m.kernel);

  nlohmann::json j = mdp_to_json(m);
  j.erase("kernel");
  CHECK_THROWS_AS(mdp_from_json(j), ConfigError);
  nlohmann::json bad = mdp_to_json(m);
  bad["kernel"][0][0][0] = 0.9;  // breaks the row sum
  CHECK_THROWS_AS(mdp_from_json(bad), ConfigError);
}

TEST_CASE("reward, policy, mixture and counts round trips") {
  RewardTable r{{{0.25, 0.5}, {0.75, 1.0}}};
  CHECK(reward_from_json(reward_to_json(r), 2, 2).r == r.r);
  CHECK_THROWS_AS(reward_from_json(reward_to_json(r), 3, 2), ConfigError);

  DeterministicPolicy pi{{{0, 1}, {1, 0}}};
  CHECK(policy_from_json(policy_to_json(pi)).action == pi.action);

  MixturePolicy mix;
  mix.members = {pi, DeterministicPolicy{{{1, 1}, {0, 0}}}};
  const MixturePolicy mback = mixture_from_json(mixture_to_json(mix));
  REQUIRE(mback.members.size() == 2);
  CHECK(mback.members[0].action == pi.action);
  nlohmann::json mj = mixture_to_json(mix);
  mj["K"] = 3;
  CHECK_THROWS_AS(mixture_from_json(mj), ConfigError);

  CountTable c = empty_counts(2, 2);
  c.n_sa[1][0] = 7;
  c.n_sas[1][0][1] = 7;
  const CountTable cback = counts_from_json(counts_to_json(c));
  CHECK(cback.num_states == 2);
  CHECK(cback.n_sa == c.n_sa);
  CHECK(cback.n_sas == c.n_sas);
}

TEST_CASE("sparsified model json round trip preserves kernel and edge set") {
  CountTable c = empty_counts(2, 2);
  c.n_sa[0][0] = 4;
  c.n_sas[0][0] = {3, 1};
  const SparsifiedModel m = sparsify_empirical(c, 3, 0, 2);

  const nlohmann::json j = model_to_json(m);
  CHECK(j.at("kind") == "empirical");
  const SparsifiedModel back = model_from_json(j);
  CHECK(back.kind == m.kind);
  CHECK(back.phi == m.phi);
  CHECK(back.kernel == m.kernel);
  CHECK(back.known == m.known);

  nlohmann::json bad = j;
  bad["kind"] = "mystery";
  CHECK_THROWS_AS(model_from_json(bad), ConfigError);
  bad = j;
  bad["known_edges"].push_back({5, 0, 0});
  CHECK_THROWS_AS(model_from_json(bad), ConfigError);
  bad = j;
  bad["known_edges"] = nlohmann::json::array();  // leaves mass on unknown edges
  CHECK_THROWS_AS(model_from_json(bad), ConfigError);
}

TEST_CASE("triples text format parses what it prints and flags bad lines") {
  OfflineDataset data;
  data.num_states = 3;
  data.num_actions = 2;
  data.triples = {{0, 1, 2}, {2, 0, 0}, {1, 1, 1}};
  const std::string text = triples_to_text(data);
  CHECK(text == "0 1 2\n2 0 0\n1 1 1\n");

  const OfflineDataset back = triples_from_text(text, 3, 2, "test");
  REQUIRE(back.triples.size() == 3);
  CHECK(back.triples[0].s_next == 2);

  CHECK_THROWS_WITH(triples_from_text("0 0 0\n0 x 0\n", 3, 2, "test"),
                    Catch::Matchers::ContainsSubstring("line 2"));
  CHECK_THROWS_WITH(triples_from_text("0 0 0 9\n", 3, 2, "test"),
                    Catch::Matchers::ContainsSubstring("trailing"));
  CHECK_THROWS_WITH(triples_from_text("0 5 0\n", 3, 2, "test"),
                    Catch::Matchers::ContainsSubstring("out of range"));
}

TEST_CASE("dataset files carry a provenance sidecar with the dimensions") {
  const fs::path dir = fresh_dir("dataset");
  OfflineDataset data;
  data.num_states = 2;
  data.num_actions = 2;
  data.triples = {{0, 0, 1}, {1, 1, 0}};
  write_dataset(dir / "d.triples", data, {{"source", "test"}});

  const nlohmann::json sidecar = load_json_file(dir / "d.triples.json");
  CHECK(sidecar.at("format") == "triples-v1");
  CHECK(sidecar.at("num_states") == 2);
  CHECK(sidecar.at("samples") == 2);
  CHECK(sidecar.at("source") == "test");

  const OfflineDataset back = read_dataset(dir / "d.triples");
  CHECK(back.num_states == 2);
  REQUIRE(back.triples.size() == 2);
  CHECK(back.triples[1].a == 1);
}

TEST_CASE("csv reports start with their headers") {
  CHECK(trace_to_csv({}).rfind("k,max_U1,episodes_to_s_dagger\n", 0) == 0);
  CHECK(eval_to_csv({}).rfind(
            "reward,v_dag_opt,v_dag_final,gap_dag,v_true_opt,v_true_final,gap_true\n",
            0) == 0);
  CHECK(diag_to_csv({}).rfind("replicate,statistic,bound,pass\n", 0) == 0);

  std::vector<DesignTraceRow> trace = {{1, 9.0, 0}, {2, 4.5, 3}};
  CHECK(trace_to_csv(trace) == "k,max_U1,episodes_to_s_dagger\n1,9,0\n2,4.5,3\n");

  std::vector<DiagRow> rows = {{1, 0.25, 1.0, true}, {2, 1.5, 1.0, false}};
  CHECK(diag_to_csv(rows) == "replicate,statistic,bound,pass\n1,0.25,1,1\n2,1.5,1,0\n");
}

TEST_CASE("run directories are complete and reproducible byte for byte") {
  RngStream gen(RngSeed{8200, 0});
  const TabularMDP truth = random_mdp(3, 2, 2, gen);
  PipelineConfig cfg;
  cfg.n_offline = 500;
  cfg.k_design = 16;
  cfg.k_deploy = 16;
  cfg.phi_override = 5;
  const std::vector<RewardTable> rewards = {random_reward(3, 2, gen),
                                            random_reward(3, 2, gen)};
  const RunArtifacts art =
      rf_npd_end_to_end(truth, uniform_logging(3, 2), cfg, rewards, RngSeed{8200, 1});

  const nlohmann::json config = {{"n", cfg.n_offline}, {"seed", 8200}};
  const fs::path dir_a = fresh_dir("run_a");
  const fs::path dir_b = fresh_dir("run_b");
  const nlohmann::json man_a = write_run_dir(dir_a, config, art);
  const nlohmann::json man_b = write_run_dir(dir_b, config, art);
  CHECK(man_a == man_b);

  for (const std::string name :
       {"config.json", "offline.triples", "offline.triples.json", "pi_ex.json",
        "trace.csv", "online.triples", "online.triples.json", "model_fine.json",
        "reward_00/pi_final.json", "reward_00/eval.csv", "reward_01/pi_final.json",
        "reward_01/eval.csv"}) {
    INFO(name);
    REQUIRE(fs::exists(dir_a / name));
    const std::string bytes = read_text_file(dir_a / name);
    CHECK(bytes == read_text_file(dir_b / name));
    // Manifest hash matches the bytes on disk.
    CHECK(man_a.at("stages").at(name) == hash_hex(bytes));
  }
  CHECK(fs::exists(dir_a / "manifest.json"));
  CHECK(man_a.at("pi_ex_fingerprint") == hex64(art.pi_ex_fingerprint));
  CHECK(man_a.at("rewards") == 2);
  CHECK(man_a.at("phi") == 5);

  // No timestamps or other volatile fields anywhere in the manifest.
  const std::string manifest_bytes = read_text_file(dir_a / "manifest.json");
  CHECK(manifest_bytes == read_text_file(dir_b / "manifest.json"));
}
