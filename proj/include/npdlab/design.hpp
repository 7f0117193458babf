#pragma once

// Non-reactive experiment design on an empirical sparsified model.
//
// The designer never touches the true MDP: it simulates virtual episodes on
// the empirical model, maintains visit counters over the sink-augmented state
// space, and greedily follows an upper bound U on its remaining uncertainty.
// The output is the uniform mixture of the greedy policies from every virtual
// episode, deployable as a single non-reactive batch.
//
// The uncertainty recursion, with phi the count bonus and clip at 1:
//   U_{H+1} = 0
//   U_h(s,a) = H * min{1, phi(n(s,a))} + <Phat(.|s,a), max_a' U_{h+1}(., a')>
// By default the sink is treated like any other state (its counters grow and
// its bonus decays); pin_absorbing_to_zero instead pins U(sink, .) = 0 at all
// stages.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "npdlab/dp.hpp"
#include "npdlab/mdp.hpp"
#include "npdlab/rng.hpp"
#include "npdlab/sparsify.hpp"

namespace npdlab {

struct BonusParams {
  int horizon = 0;
  int num_states = 0;  // real states, not counting the sink
  int num_actions = 0;
  double delta = 0.1;
};

// Count bonus phi(x) = (H/x) (log(6 H S A / delta) + S log(e (1 + x/S))).
// Nonincreasing for x > 0; +infinity at x = 0 (callers clip).
inline double bonus_phi(double x, const BonusParams& p) {
  if (p.horizon <= 0 || p.num_states <= 0 || p.num_actions <= 0) {
    throw std::invalid_argument("bonus_phi: sizes must be positive");
  }
  if (!(p.delta > 0.0 && p.delta < 1.0)) {
    throw std::invalid_argument("bonus_phi: delta must be in (0,1)");
  }
  if (x <= 0.0) return std::numeric_limits<double>::infinity();
  const double h = static_cast<double>(p.horizon);
  const double s = static_cast<double>(p.num_states);
  const double a = static_cast<double>(p.num_actions);
  return (h / x) * (std::log(6.0 * h * s * a / p.delta) +
                    s * std::log(std::exp(1.0) * (1.0 + x / s)));
}

// min{1, phi(n)}; equals 1 at n = 0.
inline double clipped_bonus(double n, const BonusParams& p) {
  if (n <= 0.0) return 1.0;
  return std::min(1.0, bonus_phi(n, p));
}

// min{1, H * phi(m)}; equals 1 at m = 0.  Used by the variance-aware
// uncertainty recursions.
inline double clipped_bonus_bar(double m, const BonusParams& p) {
  if (m <= 0.0) return 1.0;
  return std::min(1.0, p.horizon * bonus_phi(m, p));
}

struct DesignerConfig {
  std::int64_t episodes = 0;
  double delta = 0.1;
  bool pin_absorbing_to_zero = false;
};

/** Counters and uncertainty tables over the sink-augmented space. */
struct DesignerState {
  std::int64_t k = 0;  // completed virtual episodes
  std::vector<std::vector<std::int64_t>> n_sa;                // (S+1) x A
  std::vector<std::vector<std::vector<std::int64_t>>> n_sas;  // (S+1) x A x (S+1)
  std::vector<std::vector<std::vector<double>>> U;            // H x (S+1) x A
  DeterministicPolicy current;                                // greedy wrt U
};

inline DesignerState make_designer_state(const SparsifiedModel& model) {
  DesignerState st;
  const int total = model.total_states();
  st.n_sa.assign(total, std::vector<std::int64_t>(model.num_actions, 0));
  st.n_sas.assign(total, std::vector<std::vector<std::int64_t>>(
                             model.num_actions, std::vector<std::int64_t>(total, 0)));
  st.U.assign(model.horizon, std::vector<std::vector<double>>(
                                 total, std::vector<double>(model.num_actions, 0.0)));
  st.current.action.assign(model.horizon, std::vector<int>(total, 0));
  return st;
}

// Full backward recomputation of U from the current counters; O(H S^2 A).
inline void backward_uncertainty_update(DesignerState& st, const SparsifiedModel& model,
                                        const BonusParams& p,
                                        bool pin_absorbing_to_zero = false) {
  const int total = model.total_states();
  const int na = model.num_actions;
  const int hmax = model.horizon;
  std::vector<double> best_next(total, 0.0);  // max_a U_{h+1}(., a)
  for (int h = hmax - 1; h >= 0; --h) {
    if (h == hmax - 1) {
      std::fill(best_next.begin(), best_next.end(), 0.0);
    } else {
      for (int s = 0; s < total; ++s) {
        double best = 0.0;
        for (int a = 0; a < na; ++a) best = std::max(best, st.U[h + 1][s][a]);
        best_next[s] = best;
      }
    }
    for (int s = 0; s < total; ++s) {
      for (int a = 0; a < na; ++a) {
        if (pin_absorbing_to_zero && s == model.sink()) {
          st.U[h][s][a] = 0.0;
          continue;
        }
        const double bonus = p.horizon * clipped_bonus(double(st.n_sa[s][a]), p);
        const auto& row = model.kernel[s][a];
        double cont = 0.0;
        for (int s2 = 0; s2 < total; ++s2) cont += row[s2] * best_next[s2];
        st.U[h][s][a] = bonus + cont;
      }
    }
  }
}

// Greedy argmax over actions per (h, s); ties to the smallest index.
inline DeterministicPolicy greedy_policy_from_U(
    const std::vector<std::vector<std::vector<double>>>& U) {
  DeterministicPolicy pi;
  pi.action.assign(U.size(), {});
  for (std::size_t h = 0; h < U.size(); ++h) {
    pi.action[h].assign(U[h].size(), 0);
    for (std::size_t s = 0; s < U[h].size(); ++s) {
      int best_a = 0;
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < U[h][s].size(); ++a) {
        if (U[h][s][a] > best) {
          best = U[h][s][a];
          best_a = static_cast<int>(a);
        }
      }
      pi.action[h][s] = best_a;
    }
  }
  return pi;
}

struct DesignTraceRow {
  std::int64_t k = 0;       // 1-based virtual episode index
  double max_u1 = 0.0;      // max_a U_1^k(s1, a) before the episode
  int steps_to_sink = 0;    // 1-based step of first sink arrival; 0 if never
};

struct DesignResult {
  MixturePolicy mixture;
  std::vector<DesignTraceRow> trace;
  DesignerState state;
};

// Virtual-episode design loop.  Per episode: recompute U backward from the
// counters, act greedily wrt U for H steps simulated on the empirical kernel,
// update counters.  Returns the uniform mixture over all episode policies.
inline DesignResult rf_ucb(const SparsifiedModel& model, const DesignerConfig& cfg,
                           RngSeed seed) {
  validate_sparsified(model);
  if (cfg.episodes <= 0) throw std::invalid_argument("rf_ucb: episodes must be positive");

  BonusParams p;
  p.horizon = model.horizon;
  p.num_states = model.num_states;
  p.num_actions = model.num_actions;
  p.delta = cfg.delta;

  RngStream rng(seed);
  DesignResult out;
  out.state = make_designer_state(model);
  out.mixture.members.reserve(static_cast<std::size_t>(cfg.episodes));
  out.trace.reserve(static_cast<std::size_t>(cfg.episodes));

  for (std::int64_t k = 1; k <= cfg.episodes; ++k) {
    backward_uncertainty_update(out.state, model, p, cfg.pin_absorbing_to_zero);
    out.state.current = greedy_policy_from_U(out.state.U);
    out.mixture.members.push_back(out.state.current);

    DesignTraceRow row;
    row.k = k;
    double max_u1 = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < model.num_actions; ++a) {
      max_u1 = std::max(max_u1, out.state.U[0][model.initial_state][a]);
    }
    row.max_u1 = max_u1;

    int s = model.initial_state;
    for (int h = 0; h < model.horizon; ++h) {
      const int a = out.state.current.action[h][s];
      const int s2 = rng.sample_categorical(model.kernel[s][a]);
      out.state.n_sa[s][a] += 1;
      out.state.n_sas[s][a][s2] += 1;
      if (row.steps_to_sink == 0 && s2 == model.sink()) row.steps_to_sink = h + 1;
      s = s2;
    }
    out.state.k = k;
    out.trace.push_back(row);
  }
  return out;
}

// 64-bit fingerprint of a mixture's action tables; used as the non-reactivity
// witness (recorded when the mixture is produced and re-checked after the
// online phase).
inline std::uint64_t mixture_fingerprint(const MixturePolicy& mix) {
  std::uint64_t h = 14695981039346656037ull;
  auto fold = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  fold(mix.members.size());
  for (const auto& pi : mix.members) {
    fold(pi.action.size());
    for (const auto& row : pi.action) {
      fold(row.size());
      for (int a : row) fold(static_cast<std::uint64_t>(a));
    }
  }
  return h;
}

}  // namespace npdlab
