#pragma once

// Sink-augmented sparsified transition models.
//
// Given offline counts and a visit threshold phi, a transition (s, a, s') is
// "known" when its offline count reaches phi.  A sparsified model keeps the
// kernel only on known transitions and routes all remaining mass to an
// absorbing sink state with zero reward.  The sink always occupies index S
// (one past the real states), so sparsified kernels are (S+1) x A x (S+1).
//
// Three estimators share this shape:
//   population:     true probabilities on known transitions (oracle use only)
//   empirical:      offline count ratios on known transitions
//   fine_estimated: membership from offline counts, probabilities from the
//                   online counts collected by the deployed mixture
// Rows whose visit count is zero place all mass on the sink.  Probabilities
// are exact integer ratios, so row sums hold to within one ulp.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "npdlab/dataset.hpp"
#include "npdlab/mdp.hpp"

namespace npdlab {

enum class ThresholdVariant {
  horizon_log,  // horizon factor inside the logarithm (default)
  flat_log,     // logarithm argument independent of the horizon
};

struct SparsifierConfig {
  double delta = 0.1;
  ThresholdVariant variant = ThresholdVariant::horizon_log;
  std::int64_t phi_override = -1;  // >= 0 replaces the computed threshold
};

// Pre-ceiling visit threshold 6 H^2 log(12 [H] S^2 A / delta), natural log.
inline double visit_threshold_raw(int horizon, int num_states, int num_actions,
                                  double delta,
                                  ThresholdVariant variant = ThresholdVariant::horizon_log) {
  if (horizon <= 0 || num_states <= 0 || num_actions <= 0) {
    throw std::invalid_argument("visit_threshold: sizes must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("visit_threshold: delta must be in (0,1)");
  }
  const double h = static_cast<double>(horizon);
  const double s = static_cast<double>(num_states);
  const double a = static_cast<double>(num_actions);
  const double hfactor = (variant == ThresholdVariant::horizon_log) ? h : 1.0;
  return 6.0 * h * h * std::log(12.0 * hfactor * s * s * a / delta);
}

inline std::int64_t compute_phi(int horizon, int num_states, int num_actions,
                                double delta,
                                ThresholdVariant variant = ThresholdVariant::horizon_log) {
  return static_cast<std::int64_t>(
      std::ceil(visit_threshold_raw(horizon, num_states, num_actions, delta, variant)));
}

inline std::int64_t resolve_phi(const SparsifierConfig& cfg, int horizon,
                                int num_states, int num_actions) {
  if (cfg.phi_override >= 0) return cfg.phi_override;
  return compute_phi(horizon, num_states, num_actions, cfg.delta, cfg.variant);
}

using EdgeMask = std::vector<std::vector<std::vector<char>>>;  // [s][a][s']

inline EdgeMask known_edge_set(const CountTable& counts, std::int64_t phi) {
  if (phi < 0) throw std::invalid_argument("known_edge_set: negative threshold");
  EdgeMask known(counts.num_states,
                 std::vector<std::vector<char>>(counts.num_actions,
                                                std::vector<char>(counts.num_states, 0)));
  for (int s = 0; s < counts.num_states; ++s) {
    for (int a = 0; a < counts.num_actions; ++a) {
      for (int s2 = 0; s2 < counts.num_states; ++s2) {
        known[s][a][s2] = counts.n_sas[s][a][s2] >= phi ? 1 : 0;
      }
    }
  }
  return known;
}

struct SparsifiedModel {
  enum class Kind { population, empirical, fine_estimated };

  Kind kind = Kind::empirical;
  std::int64_t phi = 0;
  int num_states = 0;  // real states; the sink is index num_states
  int num_actions = 0;
  int horizon = 0;
  int initial_state = 0;
  Kernel kernel;   // (S+1) x A x (S+1)
  EdgeMask known;  // S x A x S

  int sink() const { return num_states; }
  int total_states() const { return num_states + 1; }
};

// Zero-pads a reward table with the sink row: r(sink, .) = 0.
inline RewardMatrix sparsify_reward(const RewardTable& reward, int num_states,
                                    int num_actions) {
  validate_reward(reward, num_states, num_actions);
  RewardMatrix r = reward.r;
  r.push_back(std::vector<double>(num_actions, 0.0));
  return r;
}

namespace detail {

inline SparsifiedModel make_model_shell(SparsifiedModel::Kind kind, std::int64_t phi,
                                        int num_states, int num_actions, int horizon,
                                        int initial_state, EdgeMask known) {
  SparsifiedModel m;
  m.kind = kind;
  m.phi = phi;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.horizon = horizon;
  m.initial_state = initial_state;
  m.known = std::move(known);
  const int total = num_states + 1;
  m.kernel.assign(total, std::vector<std::vector<double>>(num_actions,
                                                          std::vector<double>(total, 0.0)));
  for (int a = 0; a < num_actions; ++a) m.kernel[num_states][a][num_states] = 1.0;
  return m;
}

}  // namespace detail

inline void validate_sparsified(const SparsifiedModel& m) {
  if (m.num_states <= 0 || m.num_actions <= 0 || m.horizon <= 0) {
    throw std::invalid_argument("sparsified model: sizes must be positive");
  }
  if (m.initial_state < 0 || m.initial_state >= m.num_states) {
    throw std::invalid_argument("sparsified model: initial state out of range");
  }
  validate_kernel(m.kernel, m.total_states(), m.num_actions, m.total_states());
  for (int a = 0; a < m.num_actions; ++a) {
    if (m.kernel[m.sink()][a][m.sink()] != 1.0) {
      throw std::invalid_argument("sparsified model: sink must be absorbing");
    }
  }
  if (static_cast<int>(m.known.size()) != m.num_states) {
    throw std::invalid_argument("sparsified model: bad edge mask");
  }
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < m.num_actions; ++a) {
      for (int s2 = 0; s2 < m.num_states; ++s2) {
        if (!m.known[s][a][s2] && m.kernel[s][a][s2] != 0.0) {
          throw std::invalid_argument(
              "sparsified model: mass on unknown transition at (" + std::to_string(s) +
              "," + std::to_string(a) + "," + std::to_string(s2) + ")");
        }
      }
    }
  }
}

// True kernel restricted to known transitions; the probability the true chain
// would leave through an unknown transition goes to the sink.
inline SparsifiedModel sparsify_population(const TabularMDP& truth,
                                           const CountTable& counts, std::int64_t phi) {
  validate_mdp(truth);
  if (counts.num_states != truth.num_states || counts.num_actions != truth.num_actions) {
    throw std::invalid_argument("sparsify_population: counts do not match the MDP");
  }
  SparsifiedModel m = detail::make_model_shell(
      SparsifiedModel::Kind::population, phi, truth.num_states, truth.num_actions,
      truth.horizon, truth.initial_state, known_edge_set(counts, phi));
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < m.num_actions; ++a) {
      double known_mass = 0.0;
      for (int s2 = 0; s2 < m.num_states; ++s2) {
        if (m.known[s][a][s2]) {
          m.kernel[s][a][s2] = truth.kernel[s][a][s2];
          known_mass += truth.kernel[s][a][s2];
        }
      }
      // Clip shields the sink mass from rounding in the known-mass sum.
      m.kernel[s][a][m.sink()] = std::max(0.0, 1.0 - known_mass);
    }
  }
  validate_sparsified(m);
  return m;
}

// Count ratios on known transitions; the leftover count share goes to the
// sink.  A never-visited pair is a sink point mass.
inline SparsifiedModel sparsify_empirical(const CountTable& counts, int horizon,
                                          int initial_state, std::int64_t phi) {
  SparsifiedModel m = detail::make_model_shell(
      SparsifiedModel::Kind::empirical, phi, counts.num_states, counts.num_actions,
      horizon, initial_state, known_edge_set(counts, phi));
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < m.num_actions; ++a) {
      const std::int64_t n = counts.n_sa[s][a];
      if (n == 0) {
        m.kernel[s][a][m.sink()] = 1.0;
        continue;
      }
      std::int64_t known_count = 0;
      for (int s2 = 0; s2 < m.num_states; ++s2) {
        if (m.known[s][a][s2]) {
          m.kernel[s][a][s2] = double(counts.n_sas[s][a][s2]) / double(n);
          known_count += counts.n_sas[s][a][s2];
        }
      }
      m.kernel[s][a][m.sink()] = double(n - known_count) / double(n);
    }
  }
  validate_sparsified(m);
  return m;
}

// Membership is decided by the offline counts (through phi); probabilities are
// estimated from the online counts alone.  Online visits that left through an
// unknown transition are exactly the sink share, so each row is the empirical
// distribution of the sink-mapped next state.
inline SparsifiedModel sparsify_fine_estimated(const CountTable& offline,
                                               const CountTable& online, int horizon,
                                               int initial_state, std::int64_t phi) {
  if (offline.num_states != online.num_states ||
      offline.num_actions != online.num_actions) {
    throw std::invalid_argument("sparsify_fine_estimated: count tables disagree");
  }
  SparsifiedModel m = detail::make_model_shell(
      SparsifiedModel::Kind::fine_estimated, phi, offline.num_states,
      offline.num_actions, horizon, initial_state, known_edge_set(offline, phi));
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < m.num_actions; ++a) {
      const std::int64_t mvisits = online.n_sa[s][a];
      if (mvisits == 0) {
        m.kernel[s][a][m.sink()] = 1.0;
        continue;
      }
      std::int64_t known_count = 0;
      for (int s2 = 0; s2 < m.num_states; ++s2) {
        if (m.known[s][a][s2]) {
          m.kernel[s][a][s2] = double(online.n_sas[s][a][s2]) / double(mvisits);
          known_count += online.n_sas[s][a][s2];
        }
      }
      m.kernel[s][a][m.sink()] = double(mvisits - known_count) / double(mvisits);
    }
  }
  validate_sparsified(m);
  return m;
}

}  // namespace npdlab
