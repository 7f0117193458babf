#pragma once

// Finite-horizon dynamic programming on explicit kernels.
//
// Routines are generic over the kernel width so they serve both the raw MDP
// (S states) and sink-augmented models (S + 1 states, sink in the last slot).
// ValueTable stores the terminal all-zero row explicitly: V has H + 1 rows and
// V[H] == 0, which keeps every backward loop free of boundary cases.  Argmax
// ties break toward the smallest action index everywhere, and that convention
// is relied on by tests.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "npdlab/mdp.hpp"

namespace npdlab {

struct ValueTable {
  std::vector<std::vector<double>> V;               // (H+1) x S
  std::vector<std::vector<std::vector<double>>> Q;  // H x S x A
};

struct OccupancyTable {
  std::vector<std::vector<std::vector<double>>> d;  // H x S x A
};

namespace detail {

inline void check_dp_inputs(const Kernel& kernel, const RewardMatrix& r, int horizon) {
  if (horizon <= 0) throw std::invalid_argument("dp: horizon must be positive");
  const int ns = static_cast<int>(kernel.size());
  if (ns == 0) throw std::invalid_argument("dp: empty kernel");
  const int na = static_cast<int>(kernel[0].size());
  validate_kernel(kernel, ns, na, ns);
  if (static_cast<int>(r.size()) != ns) {
    throw std::invalid_argument("dp: reward has wrong number of states");
  }
  for (const auto& row : r) {
    if (static_cast<int>(row.size()) != na) {
      throw std::invalid_argument("dp: reward has wrong number of actions");
    }
  }
}

}  // namespace detail

// Q^pi_h(s,a) = r(s,a) + <P(.|s,a), V^pi_{h+1}>, V^pi_h(s) = Q^pi_h(s, pi_h(s)).
inline ValueTable policy_evaluation(const Kernel& kernel, const RewardMatrix& r,
                                    int horizon, const DeterministicPolicy& pi) {
  detail::check_dp_inputs(kernel, r, horizon);
  const int ns = static_cast<int>(kernel.size());
  const int na = static_cast<int>(kernel[0].size());
  validate_policy(pi, horizon, ns, na);

  ValueTable out;
  out.V.assign(horizon + 1, std::vector<double>(ns, 0.0));
  out.Q.assign(horizon, std::vector<std::vector<double>>(ns, std::vector<double>(na, 0.0)));
  for (int h = horizon - 1; h >= 0; --h) {
    const auto& vnext = out.V[h + 1];
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < na; ++a) {
        const auto& row = kernel[s][a];
        double q = r[s][a];
        for (int s2 = 0; s2 < ns; ++s2) q += row[s2] * vnext[s2];
        out.Q[h][s][a] = q;
      }
      out.V[h][s] = out.Q[h][s][pi.action[h][s]];
    }
  }
  return out;
}

struct OptimalPlan {
  ValueTable values;
  DeterministicPolicy policy;
};

// Bellman optimality backward pass; smallest maximizing action index wins.
inline OptimalPlan value_iteration_optimal(const Kernel& kernel, const RewardMatrix& r,
                                           int horizon) {
  detail::check_dp_inputs(kernel, r, horizon);
  const int ns = static_cast<int>(kernel.size());
  const int na = static_cast<int>(kernel[0].size());

  OptimalPlan out;
  out.values.V.assign(horizon + 1, std::vector<double>(ns, 0.0));
  out.values.Q.assign(horizon,
                      std::vector<std::vector<double>>(ns, std::vector<double>(na, 0.0)));
  out.policy.action.assign(horizon, std::vector<int>(ns, 0));
  for (int h = horizon - 1; h >= 0; --h) {
    const auto& vnext = out.values.V[h + 1];
    for (int s = 0; s < ns; ++s) {
      int best_a = 0;
      double best_q = -1.0;
      for (int a = 0; a < na; ++a) {
        const auto& row = kernel[s][a];
        double q = r[s][a];
        for (int s2 = 0; s2 < ns; ++s2) q += row[s2] * vnext[s2];
        out.values.Q[h][s][a] = q;
        if (q > best_q) {
          best_q = q;
          best_a = a;
        }
      }
      out.values.V[h][s] = best_q;
      out.policy.action[h][s] = best_a;
    }
  }
  return out;
}

// Stage occupancy d_h(s,a) of a deterministic policy started from one state.
// Each stage slice sums to one exactly (up to accumulated rounding).
inline OccupancyTable occupancy_measures(const Kernel& kernel, int horizon,
                                         int initial_state, const DeterministicPolicy& pi) {
  const int ns = static_cast<int>(kernel.size());
  if (ns == 0) throw std::invalid_argument("occupancy: empty kernel");
  const int na = static_cast<int>(kernel[0].size());
  if (initial_state < 0 || initial_state >= ns) {
    throw std::invalid_argument("occupancy: initial state out of range");
  }
  validate_policy(pi, horizon, ns, na);

  OccupancyTable out;
  out.d.assign(horizon, std::vector<std::vector<double>>(ns, std::vector<double>(na, 0.0)));
  std::vector<double> state_mass(ns, 0.0);
  state_mass[initial_state] = 1.0;
  for (int h = 0; h < horizon; ++h) {
    std::vector<double> next_mass(ns, 0.0);
    for (int s = 0; s < ns; ++s) {
      const double mass = state_mass[s];
      if (mass == 0.0) continue;
      const int a = pi.action[h][s];
      out.d[h][s][a] = mass;
      const auto& row = kernel[s][a];
      for (int s2 = 0; s2 < ns; ++s2) next_mass[s2] += mass * row[s2];
    }
    state_mass.swap(next_mass);
  }
  return out;
}

inline double policy_value(const Kernel& kernel, const RewardMatrix& r, int horizon,
                           int initial_state, const DeterministicPolicy& pi) {
  return policy_evaluation(kernel, r, horizon, pi).V[0][initial_state];
}

struct EnumerationResult {
  double best_value = 0.0;
  DeterministicPolicy best_policy;
  std::uint64_t policies_evaluated = 0;
};

// Exhaustive maximization over all |A|^(H*S) deterministic nonstationary
// policies.  Intended as an oracle for tiny instances; refuses when the policy
// count exceeds the guard.  The returned policy is the first maximizer in
// enumeration order (all-zero table first, last stage-state cell fastest).
inline EnumerationResult enumerate_policies_oracle(const Kernel& kernel,
                                                   const RewardMatrix& r, int horizon,
                                                   int initial_state,
                                                   std::uint64_t guard = 10000000ull) {
  detail::check_dp_inputs(kernel, r, horizon);
  const int ns = static_cast<int>(kernel.size());
  const int na = static_cast<int>(kernel[0].size());
  if (initial_state < 0 || initial_state >= ns) {
    throw std::invalid_argument("enumerate: initial state out of range");
  }

  const int digits = horizon * ns;
  std::uint64_t total = 1;
  for (int i = 0; i < digits; ++i) {
    if (total > guard / static_cast<std::uint64_t>(na)) {
      throw std::invalid_argument("enumerate: |A|^(H*S) exceeds the guard");
    }
    total *= static_cast<std::uint64_t>(na);
  }

  DeterministicPolicy pi;
  pi.action.assign(horizon, std::vector<int>(ns, 0));

  // Scratch rows for a lean backward evaluation of V_1(initial_state).
  std::vector<double> v(ns, 0.0), vnext(ns, 0.0);

  EnumerationResult out;
  out.best_value = -1.0;
  for (std::uint64_t index = 0;; ++index) {
    vnext.assign(ns, 0.0);
    for (int h = horizon - 1; h >= 0; --h) {
      for (int s = 0; s < ns; ++s) {
        const int a = pi.action[h][s];
        const auto& row = kernel[s][a];
        double q = r[s][a];
        for (int s2 = 0; s2 < ns; ++s2) q += row[s2] * vnext[s2];
        v[s] = q;
      }
      v.swap(vnext);
    }
    ++out.policies_evaluated;
    if (vnext[initial_state] > out.best_value) {
      out.best_value = vnext[initial_state];
      out.best_policy = pi;
    }

    // Mixed-radix increment over the flattened action table.
    int pos = digits - 1;
    for (; pos >= 0; --pos) {
      int& cell = pi.action[pos / ns][pos % ns];
      if (++cell < na) break;
      cell = 0;
    }
    if (pos < 0) break;
  }
  return out;
}

}  // namespace npdlab
