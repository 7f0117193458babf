#pragma once

// Experiment sweeps: the Cartesian product of an offline-size grid, a design
// budget grid and a replicate count, each cell one end-to-end run.
//
// Cell seeds derive from (master seed, cell index), so any cell can be
// reproduced in isolation and results do not depend on worker scheduling.
// Completion is tracked in <out>/manifest.json, updated atomically after each
// cell; --resume skips cells already recorded there (refusing to resume onto
// a different config), which makes interrupted sweeps restartable.  The final
// results.csv is assembled in cell order, so its bytes are independent of the
// number of worker threads.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "npdlab/config.hpp"
#include "npdlab/io.hpp"
#include "npdlab/pipeline.hpp"

namespace npdlab {

struct ExperimentSpec {
  nlohmann::json raw;  // canonical config echo, hashed for resume safety
  TabularMDP mdp;
  std::vector<RewardTable> rewards;
  LoggingDistribution mu;
  PipelineConfig base;
  std::vector<std::int64_t> n_grid;
  std::vector<std::int64_t> k_grid;
  std::int64_t k_deploy_override = -1;  // < 0 means deploy budget equals k
  std::int64_t replicates = 1;
  std::uint64_t master_seed = 0;

  std::int64_t total_cells() const {
    return static_cast<std::int64_t>(n_grid.size()) *
           static_cast<std::int64_t>(k_grid.size()) * replicates;
  }
};

inline ExperimentSpec experiment_from_json(const nlohmann::json& j,
                                           const std::filesystem::path& base_dir = ".") {
  ExperimentSpec spec;
  spec.raw = j;
  spec.mdp = resolve_mdp_spec(detail::require_field<nlohmann::json>(j, "mdp", "experiment"),
                              base_dir);
  const auto reward_specs =
      detail::require_field<std::vector<nlohmann::json>>(j, "rewards", "experiment");
  if (reward_specs.empty()) throw ConfigError("experiment: rewards must be nonempty");
  for (const auto& rs : reward_specs) {
    spec.rewards.push_back(resolve_reward_spec(rs, spec.mdp, base_dir));
  }
  spec.mu = resolve_mu_spec(j.value("mu", nlohmann::json("uniform")), spec.mdp, base_dir);
  spec.base = pipeline_config_from_json(j);
  spec.n_grid =
      detail::require_field<std::vector<std::int64_t>>(j, "n_offline_grid", "experiment");
  spec.k_grid =
      detail::require_field<std::vector<std::int64_t>>(j, "k_grid", "experiment");
  if (spec.n_grid.empty() || spec.k_grid.empty()) {
    throw ConfigError("experiment: grids must be nonempty");
  }
  for (std::int64_t n : spec.n_grid) {
    if (n < 0) throw ConfigError("experiment: n_offline_grid entries must be >= 0");
  }
  for (std::int64_t k : spec.k_grid) {
    if (k <= 0) throw ConfigError("experiment: k_grid entries must be positive");
  }
  spec.k_deploy_override = j.value("k_deploy", std::int64_t{-1});
  spec.replicates = j.value("replicates", std::int64_t{1});
  if (spec.replicates <= 0) throw ConfigError("experiment: replicates must be positive");
  spec.master_seed = j.value("master_seed", std::uint64_t{0});
  return spec;
}

struct SweepRow {
  std::int64_t cell = 0;
  std::int64_t n_offline = 0;
  std::int64_t k = 0;
  std::int64_t replicate = 0;
  std::uint64_t stream = 0;  // derived cell stream, for standalone replay
  int reward = 0;
  EvalReport eval;
  std::int64_t episodes = 0;
  std::int64_t transitions = 0;
};

inline std::string sweep_rows_to_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "cell,n_offline,k,replicate,seed,reward,v_dag_opt,v_dag_final,gap_dag,"
      "v_true_opt,v_true_final,gap_true,episodes,transitions\n";
  for (const auto& r : rows) {
    out += std::to_string(r.cell);
    out += ',';
    out += std::to_string(r.n_offline);
    out += ',';
    out += std::to_string(r.k);
    out += ',';
    out += std::to_string(r.replicate);
    out += ',';
    out += std::to_string(r.stream);
    out += ',';
    out += std::to_string(r.reward);
    out += ',';
    out += fmt_double(r.eval.v_dag_opt);
    out += ',';
    out += fmt_double(r.eval.v_dag_final);
    out += ',';
    out += fmt_double(r.eval.gap_dag);
    out += ',';
    out += fmt_double(r.eval.v_true_opt);
    out += ',';
    out += fmt_double(r.eval.v_true_final);
    out += ',';
    out += fmt_double(r.eval.gap_true);
    out += ',';
    out += std::to_string(r.episodes);
    out += ',';
    out += std::to_string(r.transitions);
    out += '\n';
  }
  return out;
}

// Worker count: explicit argument, else NPD_LAB_JOBS, else 1.
inline int resolve_jobs(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NPD_LAB_JOBS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

namespace detail {

inline nlohmann::json sweep_row_to_json(const SweepRow& r) {
  return {{"cell", r.cell},
          {"n_offline", r.n_offline},
          {"k", r.k},
          {"replicate", r.replicate},
          {"stream", r.stream},
          {"reward", r.reward},
          {"v_dag_opt", r.eval.v_dag_opt},
          {"v_dag_final", r.eval.v_dag_final},
          {"gap_dag", r.eval.gap_dag},
          {"v_true_opt", r.eval.v_true_opt},
          {"v_true_final", r.eval.v_true_final},
          {"gap_true", r.eval.gap_true},
          {"episodes", r.episodes},
          {"transitions", r.transitions}};
}

inline SweepRow sweep_row_from_json(const nlohmann::json& j) {
  SweepRow r;
  r.cell = j.at("cell").get<std::int64_t>();
  r.n_offline = j.at("n_offline").get<std::int64_t>();
  r.k = j.at("k").get<std::int64_t>();
  r.replicate = j.at("replicate").get<std::int64_t>();
  r.stream = j.at("stream").get<std::uint64_t>();
  r.reward = j.at("reward").get<int>();
  r.eval.v_dag_opt = j.at("v_dag_opt").get<double>();
  r.eval.v_dag_final = j.at("v_dag_final").get<double>();
  r.eval.gap_dag = j.at("gap_dag").get<double>();
  r.eval.v_true_opt = j.at("v_true_opt").get<double>();
  r.eval.v_true_final = j.at("v_true_final").get<double>();
  r.eval.gap_true = j.at("gap_true").get<double>();
  r.episodes = j.at("episodes").get<std::int64_t>();
  r.transitions = j.at("transitions").get<std::int64_t>();
  return r;
}

}  // namespace detail

// Runs (or resumes) a sweep, writes <out>/cells/cell_NNNNN run directories,
// <out>/manifest.json and <out>/results.csv, and returns all result rows in
// cell order.
inline std::vector<SweepRow> run_sweep(const ExperimentSpec& spec,
                                       const std::filesystem::path& out_dir, int jobs,
                                       bool resume) {
  const std::string config_hash = hash_hex(dump_json(spec.raw));
  const std::filesystem::path manifest_path = out_dir / "manifest.json";
  std::filesystem::create_directories(out_dir / "cells");

  nlohmann::json manifest = {{"config_hash", config_hash},
                             {"cells", nlohmann::json::object()}};
  if (resume && std::filesystem::exists(manifest_path)) {
    manifest = load_json_file(manifest_path);
    if (manifest.value("config_hash", "") != config_hash) {
      throw ConfigError("resume: manifest belongs to a different config");
    }
    if (!manifest.contains("cells") || !manifest["cells"].is_object()) {
      throw ConfigError("resume: malformed manifest");
    }
  }

  std::set<std::int64_t> completed;
  for (const auto& [key, value] : manifest["cells"].items()) {
    completed.insert(std::stoll(key));
  }

  const std::int64_t total = spec.total_cells();
  const std::int64_t k_cells = static_cast<std::int64_t>(spec.k_grid.size());
  std::atomic<std::int64_t> next{0};
  std::mutex manifest_mutex;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::atomic<bool> stop{false};

  auto worker = [&]() {
    for (;;) {
      if (stop.load()) return;
      const std::int64_t cell = next.fetch_add(1);
      if (cell >= total) return;
      if (completed.count(cell)) continue;
      try {
        const std::int64_t rep = cell / (static_cast<std::int64_t>(spec.n_grid.size()) * k_cells);
        const std::int64_t within = cell % (static_cast<std::int64_t>(spec.n_grid.size()) * k_cells);
        const std::int64_t i_n = within / k_cells;
        const std::int64_t i_k = within % k_cells;

        PipelineConfig cfg = spec.base;
        cfg.n_offline = spec.n_grid[i_n];
        cfg.k_design = spec.k_grid[i_k];
        cfg.k_deploy =
            spec.k_deploy_override >= 0 ? spec.k_deploy_override : spec.k_grid[i_k];

        const RngSeed cell_seed =
            RngSeed{spec.master_seed, 0}.derive("cell", static_cast<std::uint64_t>(cell));
        const RunArtifacts art =
            rf_npd_end_to_end(spec.mdp, spec.mu, cfg, spec.rewards, cell_seed);

        nlohmann::json cell_config = spec.raw;
        cell_config["cell"] = cell;
        cell_config["cell_n_offline"] = cfg.n_offline;
        cell_config["cell_k"] = cfg.k_design;
        cell_config["cell_k_deploy"] = cfg.k_deploy;
        cell_config["cell_replicate"] = rep;
        cell_config["cell_stream"] = cell_seed.stream;

        char name[32];
        std::snprintf(name, sizeof name, "cell_%05lld", static_cast<long long>(cell));
        write_run_dir(out_dir / "cells" / name, cell_config, art);

        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < art.eval.size(); ++i) {
          SweepRow row;
          row.cell = cell;
          row.n_offline = cfg.n_offline;
          row.k = cfg.k_design;
          row.replicate = rep;
          row.stream = cell_seed.stream;
          row.reward = static_cast<int>(i);
          row.eval = art.eval[i];
          row.episodes = cfg.k_deploy;
          row.transitions = cfg.k_deploy * spec.mdp.horizon;
          rows.push_back(detail::sweep_row_to_json(row));
        }

        {
          std::lock_guard<std::mutex> lock(manifest_mutex);
          manifest["cells"][std::to_string(cell)] = std::move(rows);
          write_json_file(manifest_path, manifest);
        }
      } catch (...) {
        {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
        stop.store(true);
        return;
      }
    }
  };

  const int nthreads = resolve_jobs(jobs);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<SweepRow> rows;
  for (std::int64_t cell = 0; cell < total; ++cell) {
    const auto it = manifest["cells"].find(std::to_string(cell));
    if (it == manifest["cells"].end()) {
      throw std::runtime_error("sweep: cell " + std::to_string(cell) + " missing");
    }
    for (const auto& rj : *it) rows.push_back(detail::sweep_row_from_json(rj));
  }
  write_text_atomic(out_dir / "results.csv", sweep_rows_to_csv(rows));
  return rows;
}

}  // namespace npdlab
