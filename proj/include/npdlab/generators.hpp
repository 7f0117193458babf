#pragma once

// Seeded instance generators: dense random MDPs, uniform random rewards, and
// a slippery gridworld.  All draws come from the caller's RngStream, so an
// instance is fully determined by (generator config, seed).

#include <stdexcept>
#include <vector>

#include "npdlab/mdp.hpp"
#include "npdlab/rng.hpp"

namespace npdlab {

// Kernel rows drawn uniformly from the probability simplex (normalized
// Exponential(1) draws), so every transition has positive probability.
inline TabularMDP random_mdp(int num_states, int num_actions, int horizon,
                             RngStream& rng, int initial_state = 0) {
  if (num_states <= 0 || num_actions <= 0 || horizon <= 0) {
    throw std::invalid_argument("random_mdp: sizes must be positive");
  }
  TabularMDP m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.horizon = horizon;
  m.initial_state = initial_state;
  m.kernel.assign(num_states,
                  std::vector<std::vector<double>>(num_actions,
                                                   std::vector<double>(num_states, 0.0)));
  for (int s = 0; s < num_states; ++s) {
    for (int a = 0; a < num_actions; ++a) {
      double sum = 0.0;
      auto& row = m.kernel[s][a];
      for (int s2 = 0; s2 < num_states; ++s2) {
        row[s2] = rng.next_exponential();
        sum += row[s2];
      }
      for (int s2 = 0; s2 < num_states; ++s2) row[s2] /= sum;
    }
  }
  validate_mdp(m);
  return m;
}

inline RewardTable random_reward(int num_states, int num_actions, RngStream& rng) {
  RewardTable r;
  r.r.assign(num_states, std::vector<double>(num_actions, 0.0));
  for (auto& row : r.r) {
    for (double& v : row) v = rng.next_double();
  }
  return r;
}

struct GridworldConfig {
  int width = 1;
  int height = 1;
  int horizon = 1;
  double slip = 0.1;     // probability mass spread over the three other moves
  int start_cell = 0;    // row-major cell index
};

// Four-action gridworld (0 up, 1 down, 2 left, 3 right) on a width x height
// board.  The intended move succeeds with probability 1 - slip; each of the
// other three moves receives slip / 3.  A move into the boundary keeps the
// agent in place, so slip mass can pile up on the current cell.
inline TabularMDP gridworld(const GridworldConfig& cfg) {
  if (cfg.width <= 0 || cfg.height <= 0 || cfg.horizon <= 0) {
    throw std::invalid_argument("gridworld: sizes must be positive");
  }
  if (!(cfg.slip >= 0.0 && cfg.slip <= 1.0)) {
    throw std::invalid_argument("gridworld: slip must be in [0,1]");
  }
  const int ns = cfg.width * cfg.height;
  if (cfg.start_cell < 0 || cfg.start_cell >= ns) {
    throw std::invalid_argument("gridworld: start cell out of range");
  }
  TabularMDP m;
  m.num_states = ns;
  m.num_actions = 4;
  m.horizon = cfg.horizon;
  m.initial_state = cfg.start_cell;
  m.kernel.assign(ns, std::vector<std::vector<double>>(4, std::vector<double>(ns, 0.0)));

  auto moved = [&](int cell, int move) {
    int x = cell % cfg.width;
    int y = cell / cfg.width;
    switch (move) {
      case 0: y -= 1; break;
      case 1: y += 1; break;
      case 2: x -= 1; break;
      case 3: x += 1; break;
    }
    if (x < 0 || x >= cfg.width || y < 0 || y >= cfg.height) return cell;
    return y * cfg.width + x;
  };

  for (int cell = 0; cell < ns; ++cell) {
    for (int a = 0; a < 4; ++a) {
      auto& row = m.kernel[cell][a];
      for (int move = 0; move < 4; ++move) {
        const double p = (move == a) ? 1.0 - cfg.slip : cfg.slip / 3.0;
        row[moved(cell, move)] += p;
      }
    }
  }
  validate_mdp(m);
  return m;
}

}  // namespace npdlab
