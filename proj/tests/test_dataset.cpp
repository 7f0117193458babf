#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>

#include "npdlab/dataset.hpp"
#include "npdlab/generators.hpp"
#include "npdlab/rng.hpp"

using namespace npdlab;

namespace {

std::int64_t total_samples(const CountTable& c) {
  std::int64_t total = 0;
  for (const auto& row : c.n_sa) {
    for (std::int64_t v : row) total += v;
  }
  return total;
}

}  // namespace

TEST_CASE("logging distribution validation") {
  LoggingDistribution mu = uniform_logging(3, 2);
  REQUIRE_NOTHROW(validate_logging(mu, 3, 2));
  mu.mu[0][0] += 0.5;
  CHECK_THROWS_AS(validate_logging(mu, 3, 2), std::invalid_argument);
  mu.mu[0][0] = -0.5;
  CHECK_THROWS_AS(validate_logging(mu, 3, 2), std::invalid_argument);
}

TEST_CASE("iid sampling matches the logging distribution and the kernel") {
  RngStream gen(RngSeed{2024, 0});
  const TabularMDP m = random_mdp(3, 2, 2, gen);
  LoggingDistribution mu{{{0.05, 0.15}, {0.1, 0.2}, {0.3, 0.2}}};

  RngStream rng(RngSeed{2024, 1});
  const std::int64_t n = 100000;
  const OfflineDataset data = generate_offline_dataset(m, mu, n, rng);
  REQUIRE(static_cast<std::int64_t>(data.triples.size()) == n);

  const CountTable c = count_triples(data);
  CHECK(total_samples(c) == n);

  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 2; ++a) {
      const double p = mu.mu[s][a];
      const double sigma = std::sqrt(p * (1 - p) / n);
      CHECK(std::abs(double(c.n_sa[s][a]) / n - p) <= 5.0 * sigma);
      // Conditional next-state frequencies track the kernel row.
      for (int s2 = 0; s2 < 3; ++s2) {
        const double cond = double(c.n_sas[s][a][s2]) / double(c.n_sa[s][a]);
        CHECK(std::abs(cond - m.kernel[s][a][s2]) < 0.02);
      }
    }
  }
}

TEST_CASE("deterministic allocation hits the exact target counts") {
  RngStream gen(RngSeed{42, 0});
  const TabularMDP m = random_mdp(2, 2, 2, gen);
  LoggingDistribution mu{{{0.4, 0.3}, {0.2, 0.1}}};

  RngStream rng(RngSeed{42, 1});
  const OfflineDataset data =
      generate_offline_dataset(m, mu, 10, rng, AllocationMode::deterministic);
  const CountTable c = count_triples(data);
  CHECK(c.n_sa[0][0] == 4);
  CHECK(c.n_sa[0][1] == 3);
  CHECK(c.n_sa[1][0] == 2);
  CHECK(c.n_sa[1][1] == 1);

  // With fractional remainders the largest ones are topped up first; here
  // n = 2 leaves floor counts 0,0,0,0 and remainders 0.8, 0.6, 0.4, 0.2.
  RngStream rng2(RngSeed{42, 2});
  const OfflineDataset two =
      generate_offline_dataset(m, mu, 2, rng2, AllocationMode::deterministic);
  const CountTable c2 = count_triples(two);
  CHECK(c2.n_sa[0][0] == 1);
  CHECK(c2.n_sa[0][1] == 1);
  CHECK(c2.n_sa[1][0] == 0);
  CHECK(c2.n_sa[1][1] == 0);

  // Triples come out in row-major (s, a) order.
  CHECK(two.triples[0].s == 0);
  CHECK(two.triples[0].a == 0);
  CHECK(two.triples[1].s == 0);
  CHECK(two.triples[1].a == 1);
}

TEST_CASE("count tables merge additively") {
  RngStream gen(RngSeed{77, 0});
  const TabularMDP m = random_mdp(3, 2, 2, gen);
  const LoggingDistribution mu = uniform_logging(3, 2);

  RngStream rng(RngSeed{77, 1});
  OfflineDataset first = generate_offline_dataset(m, mu, 500, rng);
  const OfflineDataset second = generate_offline_dataset(m, mu, 700, rng);

  const CountTable merged = merge_counts(count_triples(first), count_triples(second));
  OfflineDataset both = first;
  both.triples.insert(both.triples.end(), second.triples.begin(), second.triples.end());
  const CountTable direct = count_triples(both);

  CHECK(total_samples(merged) == 1200);
  CHECK(merged.n_sa == direct.n_sa);
  CHECK(merged.n_sas == direct.n_sas);

  CHECK_THROWS_AS(merge_counts(merged, empty_counts(2, 2)), std::invalid_argument);
}

TEST_CASE("count_triples rejects out-of-range entries") {
  OfflineDataset data;
  data.num_states = 2;
  data.num_actions = 2;
  data.triples = {{0, 0, 2}};
  CHECK_THROWS_AS(count_triples(data), std::invalid_argument);
  data.triples = {{0, -1, 0}};
  CHECK_THROWS_AS(count_triples(data), std::invalid_argument);
}

TEST_CASE("reachable logging covers exactly the states a policy can visit") {
  // Chain 0 -> 1 -> 2 -> 3 with a single deterministic action; horizon 2
  // reaches states 0 and 1 only.
  TabularMDP m;
  m.num_states = 4;
  m.num_actions = 1;
  m.horizon = 2;
  m.initial_state = 0;
  m.kernel.assign(4, {std::vector<double>(4, 0.0)});
  m.kernel[0][0][1] = 1.0;
  m.kernel[1][0][2] = 1.0;
  m.kernel[2][0][3] = 1.0;
  m.kernel[3][0][3] = 1.0;

  const LoggingDistribution mu = reachable_logging(m);
  CHECK(mu.mu[0][0] == Catch::Approx(0.5).margin(1e-15));
  CHECK(mu.mu[1][0] == Catch::Approx(0.5).margin(1e-15));
  CHECK(mu.mu[2][0] == 0.0);
  CHECK(mu.mu[3][0] == 0.0);
  REQUIRE_NOTHROW(validate_logging(mu, 4, 1));

  m.horizon = 4;
  const LoggingDistribution all = reachable_logging(m);
  for (int s = 0; s < 4; ++s) CHECK(all.mu[s][0] == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("concentrability on a single-state instance") {
  // One state, two actions: any policy occupies one pair with mass 1 at every
  // stage, so d = 1 there; uniform logging gives mu = 0.5 and both ratios 2.
  TabularMDP m;
  m.num_states = 1;
  m.num_actions = 2;
  m.horizon = 3;
  m.initial_state = 0;
  m.kernel = {{{1.0}, {1.0}}};
  DeterministicPolicy pi{{{1}, {1}, {1}}};

  const ConcentrabilityReport rep = concentrability(m, pi, uniform_logging(1, 2));
  CHECK(rep.finite);
  CHECK(rep.c_star == Catch::Approx(2.0).margin(1e-12));
  CHECK(rep.c_dagger == Catch::Approx(2.0).margin(1e-12));

  // Zero logging mass on a visited pair blows both constants up.
  LoggingDistribution bad{{{1.0, 0.0}}};
  const ConcentrabilityReport inf_rep = concentrability(m, pi, bad);
  CHECK_FALSE(inf_rep.finite);
  CHECK(std::isinf(inf_rep.c_star));
  CHECK(std::isinf(inf_rep.c_dagger));
}

TEST_CASE("a policy splitting mass across stages averages its occupancy") {
  // Two states, deterministic swap; the policy uses action 0 everywhere.
  // d_1(0,0) = 1, d_2(1,0) = 1, so the horizon average is 0.5 on each pair.
  TabularMDP m;
  m.num_states = 2;
  m.num_actions = 1;
  m.horizon = 2;
  m.initial_state = 0;
  m.kernel = {{{0.0, 1.0}}, {{1.0, 0.0}}};
  DeterministicPolicy pi{{{0, 0}, {0, 0}}};

  LoggingDistribution mu{{{0.25}, {0.75}}};
  const ConcentrabilityReport rep = concentrability(m, pi, mu);
  CHECK(rep.c_star == Catch::Approx(2.0).margin(1e-12));   // 0.5 / 0.25
  CHECK(rep.c_dagger == Catch::Approx(0.5 / 0.25 + 0.5 / 0.75).margin(1e-12));
}
