#pragma once

// Core tabular MDP types.
//
// A TabularMDP is finite-horizon and time-homogeneous: a single kernel shared
// by all stages h = 1..H, rewards in [0, 1], and a deterministic initial
// state.  Policies are deterministic and nonstationary, stored as an H x S
// action table; a MixturePolicy is a finite list of such members, deployed by
// drawing one member uniformly at the start of each episode.
//
// Stage indices are 0-based in code (h = 0..H-1 corresponds to steps 1..H).
// Policy tables may be wider than the kernel they are run against; routines
// only index states the kernel defines.  That convention lets policies planned
// on a sink-augmented model (width S + 1) run unchanged on the raw MDP.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "npdlab/rng.hpp"

namespace npdlab {

using Kernel = std::vector<std::vector<std::vector<double>>>;  // [s][a][s']
using RewardMatrix = std::vector<std::vector<double>>;         // [s][a]

// Row-sum slack for probability kernels and distributions.
inline constexpr double kRowSumTol = 1e-12;
// Slack for derived dynamic-programming identities.
inline constexpr double kDpTol = 1e-9;

struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  int horizon = 0;
  int initial_state = 0;
  Kernel kernel;
};

struct RewardTable {
  RewardMatrix r;  // r[s][a] in [0, 1]
};

struct DeterministicPolicy {
  std::vector<std::vector<int>> action;  // action[h][s]
};

struct MixturePolicy {
  std::vector<DeterministicPolicy> members;
};

/** One sampled trajectory: states s_1..s_{H+1} and actions a_1..a_H. */
struct Episode {
  std::vector<int> states;
  std::vector<int> actions;
};

// Validates that each kernel[s][a] is a distribution over num_next states:
// nonnegative entries, row sum within kRowSumTol of one.
inline void validate_kernel(const Kernel& kernel, int num_states,
                            int num_actions, int num_next) {
  if (static_cast<int>(kernel.size()) != num_states) {
    throw std::invalid_argument("kernel: wrong number of states");
  }
  for (int s = 0; s < num_states; ++s) {
    if (static_cast<int>(kernel[s].size()) != num_actions) {
      throw std::invalid_argument("kernel: wrong number of actions at state " +
                                  std::to_string(s));
    }
    for (int a = 0; a < num_actions; ++a) {
      const auto& row = kernel[s][a];
      if (static_cast<int>(row.size()) != num_next) {
        throw std::invalid_argument("kernel: wrong row width at (" +
                                    std::to_string(s) + "," + std::to_string(a) + ")");
      }
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0)) {
          throw std::invalid_argument("kernel: negative probability at (" +
                                      std::to_string(s) + "," + std::to_string(a) + ")");
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTol) {
        throw std::invalid_argument("kernel: row sum " + std::to_string(sum) +
                                    " at (" + std::to_string(s) + "," +
                                    std::to_string(a) + ") is not 1");
      }
    }
  }
}

inline void validate_mdp(const TabularMDP& m) {
  if (m.num_states <= 0) throw std::invalid_argument("mdp: num_states must be positive");
  if (m.num_actions <= 0) throw std::invalid_argument("mdp: num_actions must be positive");
  if (m.horizon <= 0) throw std::invalid_argument("mdp: horizon must be positive");
  if (m.initial_state < 0 || m.initial_state >= m.num_states) {
    throw std::invalid_argument("mdp: initial_state out of range");
  }
  validate_kernel(m.kernel, m.num_states, m.num_actions, m.num_states);
}

inline void validate_reward(const RewardTable& r, int num_states, int num_actions) {
  if (static_cast<int>(r.r.size()) != num_states) {
    throw std::invalid_argument("reward: wrong number of states");
  }
  for (int s = 0; s < num_states; ++s) {
    if (static_cast<int>(r.r[s].size()) != num_actions) {
      throw std::invalid_argument("reward: wrong number of actions at state " +
                                  std::to_string(s));
    }
    for (double v : r.r[s]) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("reward: entry outside [0,1] at state " +
                                    std::to_string(s));
      }
    }
  }
}

// A policy is usable against a kernel with num_states states if every stage
// row covers at least that many states with in-range action indices.
inline void validate_policy(const DeterministicPolicy& pi, int horizon,
                            int num_states, int num_actions) {
  if (static_cast<int>(pi.action.size()) != horizon) {
    throw std::invalid_argument("policy: wrong horizon");
  }
  for (int h = 0; h < horizon; ++h) {
    if (static_cast<int>(pi.action[h].size()) < num_states) {
      throw std::invalid_argument("policy: stage " + std::to_string(h) +
                                  " covers too few states");
    }
    for (int s = 0; s < num_states; ++s) {
      const int a = pi.action[h][s];
      if (a < 0 || a >= num_actions) {
        throw std::invalid_argument("policy: action out of range at stage " +
                                    std::to_string(h));
      }
    }
  }
}

inline Episode sample_episode(const TabularMDP& m, const DeterministicPolicy& pi,
                              RngStream& rng) {
  Episode ep;
  ep.states.reserve(m.horizon + 1);
  ep.actions.reserve(m.horizon);
  int s = m.initial_state;
  ep.states.push_back(s);
  for (int h = 0; h < m.horizon; ++h) {
    const int a = pi.action[h][s];
    const int s2 = rng.sample_categorical(m.kernel[s][a]);
    ep.actions.push_back(a);
    ep.states.push_back(s2);
    s = s2;
  }
  return ep;
}

}  // namespace npdlab
