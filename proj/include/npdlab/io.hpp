#pragma once

// Serialization layer: JSON schemas for every artifact, the line-delimited
// triples format, CSV reports, content hashing and run directories.
//
// File formats (all JSON is pretty-printed with sorted keys, so a given
// artifact always serializes to identical bytes):
//   mdp.json        {"num_states","num_actions","horizon","initial_state","kernel"}
//   reward.json     {"r"}
//   policy.json     {"action"}            H x S action table
//   mixture.json    {"K","policies"}      policies[k] is an H x S table
//   counts.json     {"n_sa","n_sas"}
//   model.json      {"kind","phi","kernel","known_edges",...}
//   *.triples       one "s a s_next" line per sample, plus a JSON provenance
//                   sidecar at <name>.json
// Run directories hold config.json, offline.triples, pi_ex.json, trace.csv,
// online.triples, model_fine.json, one reward_NN/ per reward with
// pi_final.json and eval.csv, and manifest.json with per-stage content
// hashes.  Manifests carry no timestamps; reruns are byte-identical.
//
// ConfigError marks bad user input (schema, ranges, unreadable input files)
// and maps to exit code 1 in the CLI; any other exception maps to 2.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "npdlab/dataset.hpp"
#include "npdlab/design.hpp"
#include "npdlab/diagnostics.hpp"
#include "npdlab/mdp.hpp"
#include "npdlab/pipeline.hpp"
#include "npdlab/rng.hpp"
#include "npdlab/sparsify.hpp"

namespace npdlab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Write-then-rename keeps partially written files out of run directories.
inline void write_text_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for write: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

inline std::string hash_hex(std::string_view bytes) { return hex64(fnv1a64(bytes)); }

// Fixed-width shortest-faithful float formatting for CSV cells.
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

inline nlohmann::json parse_json(std::string_view text, const std::string& what) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("invalid JSON in " + what);
  return j;
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
  return parse_json(read_text_file(path), path.string());
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_atomic(path, dump_json(j));
}

namespace detail {

template <typename T>
T require_field(const nlohmann::json& j, const std::string& key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(what + ": missing field \"" + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(what + ": field \"" + key + "\" has the wrong type");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MDP, reward, policy, mixture, counts

inline nlohmann::json mdp_to_json(const TabularMDP& m) {
  return {{"num_states", m.num_states},
          {"num_actions", m.num_actions},
          {"horizon", m.horizon},
          {"initial_state", m.initial_state},
          {"kernel", m.kernel}};
}

inline TabularMDP mdp_from_json(const nlohmann::json& j) {
  TabularMDP m;
  m.num_states = detail::require_field<int>(j, "num_states", "mdp");
  m.num_actions = detail::require_field<int>(j, "num_actions", "mdp");
  m.horizon = detail::require_field<int>(j, "horizon", "mdp");
  m.initial_state = detail::require_field<int>(j, "initial_state", "mdp");
  m.kernel = detail::require_field<Kernel>(j, "kernel", "mdp");
  try {
    validate_mdp(m);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mdp: ") + e.what());
  }
  return m;
}

inline nlohmann::json reward_to_json(const RewardTable& r) { return {{"r", r.r}}; }

inline RewardTable reward_from_json(const nlohmann::json& j, int num_states,
                                    int num_actions) {
  RewardTable r;
  r.r = detail::require_field<RewardMatrix>(j, "r", "reward");
  try {
    validate_reward(r, num_states, num_actions);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("reward: ") + e.what());
  }
  return r;
}

inline nlohmann::json policy_to_json(const DeterministicPolicy& pi) {
  return {{"action", pi.action}};
}

inline DeterministicPolicy policy_from_json(const nlohmann::json& j) {
  DeterministicPolicy pi;
  pi.action =
      detail::require_field<std::vector<std::vector<int>>>(j, "action", "policy");
  return pi;
}

inline nlohmann::json mixture_to_json(const MixturePolicy& mix) {
  nlohmann::json policies = nlohmann::json::array();
  for (const auto& member : mix.members) policies.push_back(member.action);
  return {{"K", mix.members.size()}, {"policies", std::move(policies)}};
}

inline MixturePolicy mixture_from_json(const nlohmann::json& j) {
  MixturePolicy mix;
  const auto tables = detail::require_field<std::vector<std::vector<std::vector<int>>>>(
      j, "policies", "mixture");
  const auto k = detail::require_field<std::size_t>(j, "K", "mixture");
  if (k != tables.size()) throw ConfigError("mixture: K does not match policies");
  if (tables.empty()) throw ConfigError("mixture: empty");
  for (const auto& t : tables) mix.members.push_back(DeterministicPolicy{t});
  return mix;
}

inline nlohmann::json counts_to_json(const CountTable& c) {
  return {{"n_sa", c.n_sa}, {"n_sas", c.n_sas}};
}

inline CountTable counts_from_json(const nlohmann::json& j) {
  CountTable c;
  c.n_sa = detail::require_field<std::vector<std::vector<std::int64_t>>>(j, "n_sa",
                                                                         "counts");
  c.n_sas =
      detail::require_field<std::vector<std::vector<std::vector<std::int64_t>>>>(
          j, "n_sas", "counts");
  c.num_states = static_cast<int>(c.n_sa.size());
  c.num_actions = c.n_sa.empty() ? 0 : static_cast<int>(c.n_sa[0].size());
  if (static_cast<int>(c.n_sas.size()) != c.num_states) {
    throw ConfigError("counts: n_sas has the wrong shape");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Sparsified models

inline std::string model_kind_name(SparsifiedModel::Kind kind) {
  switch (kind) {
    case SparsifiedModel::Kind::population: return "population";
    case SparsifiedModel::Kind::empirical: return "empirical";
    case SparsifiedModel::Kind::fine_estimated: return "fine_estimated";
  }
  throw std::logic_error("model_kind_name: bad kind");
}

inline SparsifiedModel::Kind model_kind_from_name(const std::string& name) {
  if (name == "population") return SparsifiedModel::Kind::population;
  if (name == "empirical") return SparsifiedModel::Kind::empirical;
  if (name == "fine_estimated") return SparsifiedModel::Kind::fine_estimated;
  throw ConfigError("model: unknown kind \"" + name + "\"");
}

inline nlohmann::json model_to_json(const SparsifiedModel& m) {
  nlohmann::json edges = nlohmann::json::array();
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < m.num_actions; ++a) {
      for (int s2 = 0; s2 < m.num_states; ++s2) {
        if (m.known[s][a][s2]) edges.push_back({s, a, s2});
      }
    }
  }
  return {{"kind", model_kind_name(m.kind)},
          {"phi", m.phi},
          {"num_states", m.num_states},
          {"num_actions", m.num_actions},
          {"horizon", m.horizon},
          {"initial_state", m.initial_state},
          {"kernel", m.kernel},
          {"known_edges", std::move(edges)}};
}

inline SparsifiedModel model_from_json(const nlohmann::json& j) {
  SparsifiedModel m;
  m.kind = model_kind_from_name(detail::require_field<std::string>(j, "kind", "model"));
  m.phi = detail::require_field<std::int64_t>(j, "phi", "model");
  m.num_states = detail::require_field<int>(j, "num_states", "model");
  m.num_actions = detail::require_field<int>(j, "num_actions", "model");
  m.horizon = detail::require_field<int>(j, "horizon", "model");
  m.initial_state = detail::require_field<int>(j, "initial_state", "model");
  m.kernel = detail::require_field<Kernel>(j, "kernel", "model");
  const auto edges = detail::require_field<std::vector<std::vector<int>>>(
      j, "known_edges", "model");
  if (m.num_states <= 0 || m.num_actions <= 0) {
    throw ConfigError("model: sizes must be positive");
  }
  m.known.assign(m.num_states,
                 std::vector<std::vector<char>>(m.num_actions,
                                                std::vector<char>(m.num_states, 0)));
  for (const auto& e : edges) {
    if (e.size() != 3 || e[0] < 0 || e[0] >= m.num_states || e[1] < 0 ||
        e[1] >= m.num_actions || e[2] < 0 || e[2] >= m.num_states) {
      throw ConfigError("model: bad known_edges entry");
    }
    m.known[e[0]][e[1]][e[2]] = 1;
  }
  try {
    validate_sparsified(m);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Triples files

inline std::string triples_to_text(const OfflineDataset& data) {
  std::string out;
  out.reserve(data.triples.size() * 8);
  for (const auto& t : data.triples) {
    out += std::to_string(t.s);
    out += ' ';
    out += std::to_string(t.a);
    out += ' ';
    out += std::to_string(t.s_next);
    out += '\n';
  }
  return out;
}

inline OfflineDataset triples_from_text(std::string_view text, int num_states,
                                        int num_actions, const std::string& what) {
  OfflineDataset data;
  data.num_states = num_states;
  data.num_actions = num_actions;
  std::istringstream in{std::string(text)};
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TransitionTriple t;
    if (!(ls >> t.s >> t.a >> t.s_next)) {
      throw ConfigError(what + ": malformed triple at line " + std::to_string(lineno));
    }
    std::string rest;
    if (ls >> rest) {
      throw ConfigError(what + ": trailing tokens at line " + std::to_string(lineno));
    }
    if (t.s < 0 || t.s >= num_states || t.a < 0 || t.a >= num_actions || t.s_next < 0 ||
        t.s_next >= num_states) {
      throw ConfigError(what + ": triple out of range at line " + std::to_string(lineno));
    }
    data.triples.push_back(t);
  }
  return data;
}

// Writes <path> and the provenance sidecar <path>.json.  `sidecar` should
// carry at least the dimensions, source phase and seed material.
inline void write_dataset(const std::filesystem::path& path, const OfflineDataset& data,
                          nlohmann::json sidecar) {
  sidecar["format"] = "triples-v1";
  sidecar["num_states"] = data.num_states;
  sidecar["num_actions"] = data.num_actions;
  sidecar["samples"] = data.triples.size();
  write_text_atomic(path, triples_to_text(data));
  write_json_file(std::filesystem::path(path.string() + ".json"), sidecar);
}

// Reads a triples file; dimensions come from the sidecar unless given.
inline OfflineDataset read_dataset(const std::filesystem::path& path,
                                   int num_states = -1, int num_actions = -1) {
  if (num_states < 0 || num_actions < 0) {
    const nlohmann::json sidecar =
        load_json_file(std::filesystem::path(path.string() + ".json"));
    num_states = detail::require_field<int>(sidecar, "num_states", "dataset sidecar");
    num_actions = detail::require_field<int>(sidecar, "num_actions", "dataset sidecar");
  }
  return triples_from_text(read_text_file(path), num_states, num_actions, path.string());
}

// ---------------------------------------------------------------------------
// CSV reports

inline std::string trace_to_csv(const std::vector<DesignTraceRow>& trace) {
  std::string out = "k,max_U1,episodes_to_s_dagger\n";
  for (const auto& row : trace) {
    out += std::to_string(row.k);
    out += ',';
    out += fmt_double(row.max_u1);
    out += ',';
    out += std::to_string(row.steps_to_sink);
    out += '\n';
  }
  return out;
}

inline std::string eval_to_csv(const std::vector<std::pair<int, EvalReport>>& rows) {
  std::string out =
      "reward,v_dag_opt,v_dag_final,gap_dag,v_true_opt,v_true_final,gap_true\n";
  for (const auto& [idx, rep] : rows) {
    out += std::to_string(idx);
    out += ',';
    out += fmt_double(rep.v_dag_opt);
    out += ',';
    out += fmt_double(rep.v_dag_final);
    out += ',';
    out += fmt_double(rep.gap_dag);
    out += ',';
    out += fmt_double(rep.v_true_opt);
    out += ',';
    out += fmt_double(rep.v_true_final);
    out += ',';
    out += fmt_double(rep.gap_true);
    out += '\n';
  }
  return out;
}

/** One diagnostics replicate: a scalar statistic against its bound. */
struct DiagRow {
  std::int64_t replicate = 0;
  double statistic = 0.0;
  double bound = 0.0;
  bool pass = false;
};

inline std::string diag_to_csv(const std::vector<DiagRow>& rows) {
  std::string out = "replicate,statistic,bound,pass\n";
  for (const auto& row : rows) {
    out += std::to_string(row.replicate);
    out += ',';
    out += fmt_double(row.statistic);
    out += ',';
    out += fmt_double(row.bound);
    out += ',';
    out += row.pass ? "1" : "0";
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Run directories

inline std::string reward_dir_name(std::size_t index) {
  std::ostringstream name;
  name << "reward_" << std::setw(2) << std::setfill('0') << index;
  return name.str();
}

// Writes every stage artifact plus manifest.json; returns the manifest.  The
// manifest maps each file to the hash of its bytes, so identical configs and
// seeds reproduce identical directories byte for byte.
inline nlohmann::json write_run_dir(const std::filesystem::path& dir,
                                    const nlohmann::json& config,
                                    const RunArtifacts& art) {
  std::filesystem::create_directories(dir);
  nlohmann::json stages = nlohmann::json::object();

  auto put = [&](const std::string& name, const std::string& bytes) {
    const std::filesystem::path path = dir / name;
    std::filesystem::create_directories(path.parent_path());
    write_text_atomic(path, bytes);
    stages[name] = hash_hex(bytes);
  };

  const std::string config_bytes = dump_json(config);
  put("config.json", config_bytes);

  nlohmann::json offline_sidecar = {{"source", "offline"}};
  put("offline.triples", triples_to_text(art.offline));
  {
    nlohmann::json sc = offline_sidecar;
    sc["format"] = "triples-v1";
    sc["num_states"] = art.offline.num_states;
    sc["num_actions"] = art.offline.num_actions;
    sc["samples"] = art.offline.triples.size();
    put("offline.triples.json", dump_json(sc));
  }

  put("pi_ex.json", dump_json(mixture_to_json(art.design.mixture)));
  put("trace.csv", trace_to_csv(art.design.trace));

  put("online.triples", triples_to_text(art.online.data));
  {
    nlohmann::json sc = {{"source", "online"},
                         {"format", "triples-v1"},
                         {"num_states", art.online.data.num_states},
                         {"num_actions", art.online.data.num_actions},
                         {"samples", art.online.data.triples.size()},
                         {"episodes", art.online.member_index.size()}};
    put("online.triples.json", dump_json(sc));
  }

  put("model_fine.json", dump_json(model_to_json(art.fine)));

  for (std::size_t i = 0; i < art.pi_final.size(); ++i) {
    const std::string base = reward_dir_name(i) + "/";
    put(base + "pi_final.json", dump_json(policy_to_json(art.pi_final[i])));
    put(base + "eval.csv", eval_to_csv({{static_cast<int>(i), art.eval[i]}}));
  }

  nlohmann::json manifest = {{"config_hash", hash_hex(config_bytes)},
                             {"phi", art.phi},
                             {"pi_ex_fingerprint", hex64(art.pi_ex_fingerprint)},
                             {"rewards", art.pi_final.size()},
                             {"stages", std::move(stages)}};
  write_json_file(dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace npdlab
