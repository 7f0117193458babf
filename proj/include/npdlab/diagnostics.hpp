#pragma once

// Diagnostics: population-side uncertainty recursions and high-probability
// event checks.  These quantify how far the fine-estimated model can be from
// the population sparsified model, and verify on simulated replicates that the
// concentration events behind those bounds hold at the advertised rates.
//
// All tables are H x (S+1) x A over the sink-augmented space with the sink
// rows pinned to zero.  phi is the count bonus from the designer; m(s,a) are
// online visit counts.  With clip(h) = H - h + 1 (1-based stages):
//
//   X_h(s,a)     = min{clip, 9 H phi(m) + (1 + 1/H) <P, max_a' X_{h+1}>}
//   Xpi_h(s,a)   = min{clip, 9 H phi(m) + (1 + 1/H) <P, Xpi_{h+1}(., pi)>}
//   Ypi_h(s,a)   =            sqrt((8/H^2) barphi(m) Var_P V_{h+1}) +
//                             (1 + 1/H) <P, Ypi_{h+1}(., pi)>      (no clip)
//   W_h(s,a)     = min{clip, sqrt((8/H^2) barphi(m) Var_P V_{h+1}) +
//                            9 H phi(m) + (1 + 1/H) <P, W_{h+1}(., pi)>}
//
// where P is the fine-estimated kernel, V the policy's value on it, and
// barphi the 1-clipped H phi.  W <= Xpi + Ypi and Xpi <= X hold entrywise by
// induction; tests assert them directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "npdlab/dataset.hpp"
#include "npdlab/design.hpp"
#include "npdlab/dp.hpp"
#include "npdlab/sparsify.hpp"

namespace npdlab {

using UncertaintyTable = std::vector<std::vector<std::vector<double>>>;  // H x (S+1) x A

namespace detail {

inline void check_diag_inputs(const SparsifiedModel& model, const CountTable& m_counts) {
  validate_sparsified(model);
  if (m_counts.num_states != model.num_states ||
      m_counts.num_actions != model.num_actions) {
    throw std::invalid_argument("diagnostics: counts do not match the model");
  }
}

inline UncertaintyTable zero_table(const SparsifiedModel& model) {
  return UncertaintyTable(
      model.horizon,
      std::vector<std::vector<double>>(model.total_states(),
                                       std::vector<double>(model.num_actions, 0.0)));
}

}  // namespace detail

// Policy-free uncertainty X.  The clipped form keeps zero-count pairs finite:
// phi(0) = +inf simply lands on the clip H - h + 1.
inline UncertaintyTable population_uncertainty_X(const SparsifiedModel& model,
                                                 const CountTable& m_counts,
                                                 const BonusParams& p) {
  detail::check_diag_inputs(model, m_counts);
  UncertaintyTable x = detail::zero_table(model);
  const int total = model.total_states();
  const double inflate = 1.0 + 1.0 / p.horizon;
  std::vector<double> best_next(total, 0.0);
  for (int h = model.horizon - 1; h >= 0; --h) {
    const double clip = static_cast<double>(model.horizon - h);
    if (h == model.horizon - 1) {
      std::fill(best_next.begin(), best_next.end(), 0.0);
    } else {
      for (int s = 0; s < total; ++s) {
        double best = 0.0;
        for (int a = 0; a < model.num_actions; ++a) best = std::max(best, x[h + 1][s][a]);
        best_next[s] = best;
      }
    }
    for (int s = 0; s < model.num_states; ++s) {  // sink rows stay zero
      for (int a = 0; a < model.num_actions; ++a) {
        const double phi = bonus_phi(double(m_counts.n_sa[s][a]), p);
        const auto& row = model.kernel[s][a];
        double cont = 0.0;
        for (int s2 = 0; s2 < total; ++s2) cont += row[s2] * best_next[s2];
        x[h][s][a] = std::min(clip, 9.0 * p.horizon * phi + inflate * cont);
      }
    }
  }
  return x;
}

/** Policy-specific recursions evaluated together with shared scratch. */
struct IntermediateUncertainties {
  UncertaintyTable w;
  UncertaintyTable x_pi;
  UncertaintyTable y_pi;
  ValueTable values;  // the policy's value on (fine kernel, sink-padded reward)
};

inline IntermediateUncertainties intermediate_uncertainties(
    const SparsifiedModel& model, const CountTable& m_counts, const BonusParams& p,
    const DeterministicPolicy& pi, const RewardTable& reward) {
  detail::check_diag_inputs(model, m_counts);
  const int total = model.total_states();
  validate_policy(pi, model.horizon, total, model.num_actions);
  const RewardMatrix r_dag = sparsify_reward(reward, model.num_states, model.num_actions);

  IntermediateUncertainties out;
  out.values = policy_evaluation(model.kernel, r_dag, model.horizon, pi);
  out.w = detail::zero_table(model);
  out.x_pi = detail::zero_table(model);
  out.y_pi = detail::zero_table(model);

  const double inflate = 1.0 + 1.0 / p.horizon;
  const double var_scale = 8.0 / (double(p.horizon) * p.horizon);
  for (int h = model.horizon - 1; h >= 0; --h) {
    const double clip = static_cast<double>(model.horizon - h);
    const auto& vnext = out.values.V[h + 1];
    for (int s = 0; s < model.num_states; ++s) {  // sink rows stay zero
      for (int a = 0; a < model.num_actions; ++a) {
        const double mvisits = double(m_counts.n_sa[s][a]);
        const double phi = bonus_phi(mvisits, p);
        const double barphi = clipped_bonus_bar(mvisits, p);
        const auto& row = model.kernel[s][a];

        double mean_v = 0.0, mean_v2 = 0.0;
        double cont_w = 0.0, cont_x = 0.0, cont_y = 0.0;
        for (int s2 = 0; s2 < total; ++s2) {
          const double pr = row[s2];
          if (pr == 0.0) continue;
          mean_v += pr * vnext[s2];
          mean_v2 += pr * vnext[s2] * vnext[s2];
          if (h + 1 < model.horizon) {
            const int a2 = pi.action[h + 1][s2];
            cont_w += pr * out.w[h + 1][s2][a2];
            cont_x += pr * out.x_pi[h + 1][s2][a2];
            cont_y += pr * out.y_pi[h + 1][s2][a2];
          }
        }
        const double var = std::max(0.0, mean_v2 - mean_v * mean_v);
        const double dev = std::sqrt(var_scale * barphi * var);
        out.w[h][s][a] = std::min(clip, dev + 9.0 * p.horizon * phi + inflate * cont_w);
        out.x_pi[h][s][a] = std::min(clip, 9.0 * p.horizon * phi + inflate * cont_x);
        out.y_pi[h][s][a] = dev + inflate * cont_y;
      }
    }
  }
  return out;
}

/**
 * Model-difference check: |V(fine) - V(population)| against the policy-free
 * X bound, per (policy, reward) pair.  fitted_c is the smallest constant that
 * makes lhs <= x_term + c * sqrt(x_term) hold across all pairs; reference_c is
 * the concrete constant the bound is stated with.  A pair with x_term = 0 and
 * a positive lhs cannot be repaired by any c and counts as a violation.
 */
struct Lemma1Row {
  double lhs = 0.0;
  double x_term = 0.0;
};

struct Lemma1Report {
  std::vector<Lemma1Row> rows;
  double fitted_c = 0.0;
  double reference_c = 2.0 * std::sqrt(2.0) * std::exp(1.0);
  int violations = 0;
};

inline Lemma1Report check_lemma1(const SparsifiedModel& fine, const CountTable& m_counts,
                                 const BonusParams& p, const SparsifiedModel& population,
                                 const std::vector<DeterministicPolicy>& policies,
                                 const std::vector<RewardTable>& rewards) {
  detail::check_diag_inputs(fine, m_counts);
  validate_sparsified(population);
  if (policies.size() != rewards.size()) {
    throw std::invalid_argument("check_lemma1: need one reward per policy");
  }
  const UncertaintyTable x = population_uncertainty_X(fine, m_counts, p);
  double x_term = 0.0;
  for (int a = 0; a < fine.num_actions; ++a) {
    x_term = std::max(x_term, x[0][fine.initial_state][a]);
  }

  Lemma1Report rep;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const RewardMatrix r_dag =
        sparsify_reward(rewards[i], fine.num_states, fine.num_actions);
    const double v_fine =
        policy_value(fine.kernel, r_dag, fine.horizon, fine.initial_state, policies[i]);
    const double v_pop = policy_value(population.kernel, r_dag, population.horizon,
                                      population.initial_state, policies[i]);
    Lemma1Row row;
    row.lhs = std::abs(v_fine - v_pop);
    row.x_term = x_term;
    rep.rows.push_back(row);
    if (x_term > 0.0) {
      rep.fitted_c = std::max(rep.fitted_c, (row.lhs - x_term) / std::sqrt(x_term));
    } else if (row.lhs > kDpTol) {
      rep.violations += 1;
    }
  }
  rep.fitted_c = std::max(rep.fitted_c, 0.0);
  return rep;
}

/**
 * Multiplicative-accuracy sandwich on retained transitions:
 *   (1 - 1/H) Phat <= P <= (1 + 1/H) Phat  for every known (s,a,s').
 * `statistic` is the worst H |P/Phat - 1| over known transitions (<= 1 iff the
 * sandwich holds); the bound column is the constant 1.
 */
struct SandwichReport {
  bool holds = true;
  std::int64_t checked = 0;
  double statistic = 0.0;
};

inline SandwichReport check_multiplicative_accuracy(const SparsifiedModel& population,
                                                    const SparsifiedModel& empirical) {
  validate_sparsified(population);
  validate_sparsified(empirical);
  if (population.num_states != empirical.num_states ||
      population.num_actions != empirical.num_actions ||
      population.horizon != empirical.horizon ||
      population.known != empirical.known) {
    throw std::invalid_argument(
        "check_multiplicative_accuracy: models must share shape and edge set");
  }
  const double h = static_cast<double>(population.horizon);
  SandwichReport rep;
  for (int s = 0; s < population.num_states; ++s) {
    for (int a = 0; a < population.num_actions; ++a) {
      for (int s2 = 0; s2 < population.num_states; ++s2) {
        if (!population.known[s][a][s2]) continue;
        const double p_true = population.kernel[s][a][s2];
        const double p_hat = empirical.kernel[s][a][s2];
        rep.checked += 1;
        // A known transition has a count >= phi >= 1, so p_hat > 0.
        const double stat = h * std::abs(p_true / p_hat - 1.0);
        rep.statistic = std::max(rep.statistic, stat);
      }
    }
  }
  rep.holds = rep.statistic <= 1.0 + 1e-12;
  return rep;
}

/**
 * Occupancy sandwich under a fixed policy on the two models, away from the
 * sink: (1/4) d_pop <= d_emp <= 3 d_pop per (h, s, a).  `statistic` is the
 * worst signed violation max(d_emp - 3 d_pop, d_pop / 4 - d_emp); nonpositive
 * means the band holds (the bound column is 0).
 */
struct VisitationReport {
  bool holds = true;
  std::int64_t checked = 0;
  double statistic = -std::numeric_limits<double>::infinity();
};

inline VisitationReport check_visitation_ratio(
    const SparsifiedModel& population, const SparsifiedModel& empirical,
    const std::vector<DeterministicPolicy>& policies) {
  validate_sparsified(population);
  validate_sparsified(empirical);
  if (population.num_states != empirical.num_states ||
      population.num_actions != empirical.num_actions ||
      population.horizon != empirical.horizon ||
      population.initial_state != empirical.initial_state) {
    throw std::invalid_argument("check_visitation_ratio: models must share shape");
  }
  VisitationReport rep;
  for (const auto& pi : policies) {
    const OccupancyTable d_pop = occupancy_measures(
        population.kernel, population.horizon, population.initial_state, pi);
    const OccupancyTable d_emp = occupancy_measures(
        empirical.kernel, empirical.horizon, empirical.initial_state, pi);
    for (int h = 0; h < population.horizon; ++h) {
      for (int s = 0; s < population.num_states; ++s) {  // sink excluded
        for (int a = 0; a < population.num_actions; ++a) {
          const double dp = d_pop.d[h][s][a];
          const double de = d_emp.d[h][s][a];
          rep.checked += 1;
          rep.statistic = std::max(rep.statistic, std::max(de - 3.0 * dp, dp / 4.0 - de));
        }
      }
    }
  }
  rep.holds = rep.statistic <= 1e-12;
  return rep;
}

/**
 * Per-row KL event for the fine-estimated kernel: for each (s,a) with at
 * least one online visit,
 *   KL(Ptilde(.|s,a) ; Pdagger(.|s,a)) <= (1/m) (log(6 S A / delta)
 *                                         + S log(e (1 + m / S))).
 * The KL is over the sink-augmented alphabet.  `statistic` is the worst
 * KL / bound ratio (bound column 1).  The fine kernel's support is contained
 * in the population kernel's support by construction; a row where that fails
 * reports an infinite statistic.
 */
struct KlRow {
  int s = 0;
  int a = 0;
  std::int64_t m = 0;
  double kl = 0.0;
  double bound = 0.0;
};

struct KlReport {
  bool holds = true;
  std::vector<KlRow> rows;
  double statistic = 0.0;
};

inline KlReport check_event_kl(const SparsifiedModel& fine,
                               const SparsifiedModel& population,
                               const CountTable& m_counts, const BonusParams& p) {
  detail::check_diag_inputs(fine, m_counts);
  validate_sparsified(population);
  if (population.num_states != fine.num_states ||
      population.num_actions != fine.num_actions) {
    throw std::invalid_argument("check_event_kl: models must share shape");
  }
  const double s_real = static_cast<double>(p.num_states);
  const double log_term = std::log(6.0 * s_real * p.num_actions / p.delta);

  KlReport rep;
  for (int s = 0; s < fine.num_states; ++s) {
    for (int a = 0; a < fine.num_actions; ++a) {
      const std::int64_t m = m_counts.n_sa[s][a];
      if (m == 0) continue;
      double kl = 0.0;
      for (int s2 = 0; s2 < fine.total_states(); ++s2) {
        const double pt = fine.kernel[s][a][s2];
        if (pt == 0.0) continue;
        const double pd = population.kernel[s][a][s2];
        if (pd == 0.0) {
          kl = std::numeric_limits<double>::infinity();
          break;
        }
        kl += pt * std::log(pt / pd);
      }
      KlRow row;
      row.s = s;
      row.a = a;
      row.m = m;
      row.kl = std::max(kl, 0.0);  // rounding can leave a tiny negative KL
      row.bound =
          (log_term + s_real * std::log(std::exp(1.0) * (1.0 + double(m) / s_real))) /
          double(m);
      rep.rows.push_back(row);
      rep.statistic = std::max(rep.statistic, row.kl / row.bound);
    }
  }
  rep.holds = rep.statistic <= 1.0;
  return rep;
}

}  // namespace npdlab
