#pragma once

// Offline data: logging distributions, transition triples, count tables and
// coverage statistics.
//
// A dataset is an unordered bag of (s, a, s') triples drawn by a logging
// distribution mu over state-action pairs; episode structure is deliberately
// not retained.  CountTable keeps both n(s,a) and n(s,a,s') as exact 64-bit
// integers, and every probability later derived from counts is an exact ratio
// of those integers.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "npdlab/dp.hpp"
#include "npdlab/mdp.hpp"
#include "npdlab/rng.hpp"

namespace npdlab {

struct TransitionTriple {
  int s = 0;
  int a = 0;
  int s_next = 0;
};

struct OfflineDataset {
  int num_states = 0;
  int num_actions = 0;
  std::vector<TransitionTriple> triples;
};

struct CountTable {
  int num_states = 0;
  int num_actions = 0;
  std::vector<std::vector<std::int64_t>> n_sa;                 // [s][a]
  std::vector<std::vector<std::vector<std::int64_t>>> n_sas;   // [s][a][s']
};

/** Joint distribution over (s, a); entries sum to one. */
struct LoggingDistribution {
  std::vector<std::vector<double>> mu;  // [s][a]
};

inline void validate_logging(const LoggingDistribution& mu, int num_states,
                             int num_actions) {
  if (static_cast<int>(mu.mu.size()) != num_states) {
    throw std::invalid_argument("logging distribution: wrong number of states");
  }
  double sum = 0.0;
  for (const auto& row : mu.mu) {
    if (static_cast<int>(row.size()) != num_actions) {
      throw std::invalid_argument("logging distribution: wrong number of actions");
    }
    for (double p : row) {
      if (!(p >= 0.0)) {
        throw std::invalid_argument("logging distribution: negative mass");
      }
      sum += p;
    }
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("logging distribution: total mass is not 1");
  }
}

inline LoggingDistribution uniform_logging(int num_states, int num_actions) {
  LoggingDistribution mu;
  mu.mu.assign(num_states,
               std::vector<double>(num_actions, 1.0 / (double(num_states) * num_actions)));
  return mu;
}

// Uniform over (reachable state, any action), where a state is reachable if
// some policy can visit it within the horizon (BFS over the kernel support
// from the initial state, at most H - 1 expansions).
inline LoggingDistribution reachable_logging(const TabularMDP& m) {
  validate_mdp(m);
  std::vector<char> reachable(m.num_states, 0);
  std::vector<int> frontier = {m.initial_state};
  reachable[m.initial_state] = 1;
  for (int depth = 1; depth < m.horizon && !frontier.empty(); ++depth) {
    std::vector<int> next;
    for (int s : frontier) {
      for (int a = 0; a < m.num_actions; ++a) {
        for (int s2 = 0; s2 < m.num_states; ++s2) {
          if (m.kernel[s][a][s2] > 0.0 && !reachable[s2]) {
            reachable[s2] = 1;
            next.push_back(s2);
          }
        }
      }
    }
    frontier.swap(next);
  }
  int count = 0;
  for (char c : reachable) count += c;
  LoggingDistribution mu;
  mu.mu.assign(m.num_states, std::vector<double>(m.num_actions, 0.0));
  const double p = 1.0 / (double(count) * m.num_actions);
  for (int s = 0; s < m.num_states; ++s) {
    if (!reachable[s]) continue;
    for (int a = 0; a < m.num_actions; ++a) mu.mu[s][a] = p;
  }
  return mu;
}

enum class AllocationMode {
  iid,            // (s,a) ~ mu independently per sample
  deterministic,  // fixed counts: floor(n * mu) plus largest-remainder top-up
};

// Draws n transition triples.  In iid mode each sample draws (s,a) from mu and
// then s' from the kernel row.  In deterministic mode the per-pair sample
// counts are fixed up front (floor allocation, remainder to the largest
// fractional parts, ties to the smaller flat index) and only next states are
// random; triples are emitted in row-major (s,a) order.
inline OfflineDataset generate_offline_dataset(const TabularMDP& m,
                                               const LoggingDistribution& mu,
                                               std::int64_t n, RngStream& rng,
                                               AllocationMode mode = AllocationMode::iid) {
  validate_mdp(m);
  validate_logging(mu, m.num_states, m.num_actions);
  if (n < 0) throw std::invalid_argument("generate_offline_dataset: negative size");

  OfflineDataset out;
  out.num_states = m.num_states;
  out.num_actions = m.num_actions;
  out.triples.reserve(static_cast<std::size_t>(n));

  if (mode == AllocationMode::iid) {
    std::vector<double> flat(static_cast<std::size_t>(m.num_states) * m.num_actions);
    for (int s = 0; s < m.num_states; ++s) {
      for (int a = 0; a < m.num_actions; ++a) flat[s * m.num_actions + a] = mu.mu[s][a];
    }
    for (std::int64_t i = 0; i < n; ++i) {
      const int idx = rng.sample_categorical(flat);
      const int s = idx / m.num_actions;
      const int a = idx % m.num_actions;
      const int s2 = rng.sample_categorical(m.kernel[s][a]);
      out.triples.push_back({s, a, s2});
    }
    return out;
  }

  // Deterministic allocation.
  const int cells = m.num_states * m.num_actions;
  std::vector<std::int64_t> alloc(cells, 0);
  std::vector<std::pair<double, int>> remainder(cells);
  std::int64_t assigned = 0;
  for (int idx = 0; idx < cells; ++idx) {
    const double target = double(n) * mu.mu[idx / m.num_actions][idx % m.num_actions];
    alloc[idx] = static_cast<std::int64_t>(target);
    assigned += alloc[idx];
    remainder[idx] = {target - double(alloc[idx]), idx};
  }
  std::sort(remainder.begin(), remainder.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  for (std::int64_t i = 0; i < n - assigned; ++i) alloc[remainder[i % cells].second] += 1;
  for (int idx = 0; idx < cells; ++idx) {
    const int s = idx / m.num_actions;
    const int a = idx % m.num_actions;
    for (std::int64_t i = 0; i < alloc[idx]; ++i) {
      out.triples.push_back({s, a, rng.sample_categorical(m.kernel[s][a])});
    }
  }
  return out;
}

inline CountTable empty_counts(int num_states, int num_actions) {
  CountTable c;
  c.num_states = num_states;
  c.num_actions = num_actions;
  c.n_sa.assign(num_states, std::vector<std::int64_t>(num_actions, 0));
  c.n_sas.assign(num_states,
                 std::vector<std::vector<std::int64_t>>(
                     num_actions, std::vector<std::int64_t>(num_states, 0)));
  return c;
}

inline CountTable count_triples(const OfflineDataset& data) {
  if (data.num_states <= 0 || data.num_actions <= 0) {
    throw std::invalid_argument("count_triples: dataset missing dimensions");
  }
  CountTable c = empty_counts(data.num_states, data.num_actions);
  for (const auto& t : data.triples) {
    if (t.s < 0 || t.s >= data.num_states || t.a < 0 || t.a >= data.num_actions ||
        t.s_next < 0 || t.s_next >= data.num_states) {
      throw std::invalid_argument("count_triples: triple out of range");
    }
    c.n_sa[t.s][t.a] += 1;
    c.n_sas[t.s][t.a][t.s_next] += 1;
  }
  return c;
}

inline CountTable merge_counts(const CountTable& x, const CountTable& y) {
  if (x.num_states != y.num_states || x.num_actions != y.num_actions) {
    throw std::invalid_argument("merge_counts: mismatched dimensions");
  }
  CountTable c = x;
  for (int s = 0; s < c.num_states; ++s) {
    for (int a = 0; a < c.num_actions; ++a) {
      c.n_sa[s][a] += y.n_sa[s][a];
      for (int s2 = 0; s2 < c.num_states; ++s2) c.n_sas[s][a][s2] += y.n_sas[s][a][s2];
    }
  }
  return c;
}

/**
 * Coverage of a target policy by the logging distribution.  With
 * d(s,a) = (1/H) sum_h d_h(s,a) the horizon-averaged occupancy of the policy:
 *   c_star   = max over visited (s,a) of d(s,a) / mu(s,a)
 *   c_dagger = sum over visited (s,a) of d(s,a) / mu(s,a)
 * A visited pair with zero logging mass makes both infinite; `finite` flags
 * that case explicitly so reports can carry a distinguished value instead of
 * an overflowed number.
 */
struct ConcentrabilityReport {
  double c_star = 0.0;
  double c_dagger = 0.0;
  bool finite = true;
};

inline ConcentrabilityReport concentrability(const TabularMDP& m,
                                             const DeterministicPolicy& pi,
                                             const LoggingDistribution& mu) {
  validate_mdp(m);
  validate_logging(mu, m.num_states, m.num_actions);
  const OccupancyTable occ = occupancy_measures(m.kernel, m.horizon, m.initial_state, pi);

  ConcentrabilityReport rep;
  for (int s = 0; s < m.num_states; ++s) {
    for (int a = 0; a < m.num_actions; ++a) {
      double d = 0.0;
      for (int h = 0; h < m.horizon; ++h) d += occ.d[h][s][a];
      d /= double(m.horizon);
      if (d <= 0.0) continue;
      if (mu.mu[s][a] <= 0.0) {
        rep.finite = false;
        rep.c_star = std::numeric_limits<double>::infinity();
        rep.c_dagger = std::numeric_limits<double>::infinity();
        return rep;
      }
      const double ratio = d / mu.mu[s][a];
      if (ratio > rep.c_star) rep.c_star = ratio;
      rep.c_dagger += ratio;
    }
  }
  return rep;
}

}  // namespace npdlab
