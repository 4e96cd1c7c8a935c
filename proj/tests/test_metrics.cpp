#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "rdx/decomp.hpp"
#include "rdx/mdp.hpp"
#include "rdx/metrics.hpp"

using namespace rdx;

namespace {

DecompositionParams saturated_corners(const GridworldSpec& spec, int n) {
  DecompositionParams p;
  p.logits = Mat::Zero(spec.n_states(), n);
  const std::vector<GridCell> corners = {
      {0, 0}, {spec.width - 1, 0}, {0, spec.height - 1}, {spec.width - 1, spec.height - 1}};
  for (int k = 0; k < 4; ++k) p.logits(spec.cell_index(corners[k]), k % n) = 40.0;
  return p;
}

}  // namespace

TEST_CASE("saturation scores the sharpness of a split") {
  Vec two(2);
  two << 1.0, 0.0;
  CHECK(saturation_score(two, 1.0) == Catch::Approx(1.0).margin(1e-12));
  two << 0.5, 0.5;
  CHECK(saturation_score(two, 1.0) == Catch::Approx(0.0).margin(1e-12));
  two << 0.75, 0.25;
  CHECK(saturation_score(two, 1.0) == Catch::Approx(0.5).margin(1e-12));
  two << 0.25, 0.75;  // order of the parts cannot matter
  CHECK(saturation_score(two, 1.0) == Catch::Approx(0.5).margin(1e-12));
  two << -0.75, -0.25;  // shares of a negative reward
  CHECK(saturation_score(two, -1.0) == Catch::Approx(0.5).margin(1e-12));

  CHECK_THROWS_AS(saturation_score(Vec::Ones(1), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(saturation_score(Vec::Zero(2), 0.0), std::domain_error);
}

TEST_CASE("average saturation weighs rewarding states by visitation") {
  GridworldSpec spec;
  spec.width = 2;
  spec.height = 1;
  spec.reward_cells = {{{0, 0}, 1.0}, {{1, 0}, 2.0}};
  spec.teleport_on_reward = false;
  const TabularMdp mdp = build_gridworld(spec, 0.9);

  DecompositionParams p;
  p.logits.resize(2, 2);
  p.logits << std::log(3.0), 0.0, 0.0, 0.0;  // scores 0.5 and 0.0
  // the uniform walk splits its time evenly between the two cells
  CHECK(average_saturation(mdp, p) == Catch::Approx(0.25).margin(1e-9));

  const auto corners = GridworldSpec::four_corners(5, 5, 1.0);
  const TabularMdp grid = build_gridworld(corners);
  CHECK(average_saturation(grid, saturated_corners(corners, 4)) ==
        Catch::Approx(1.0).margin(1e-9));

  GridworldSpec barren;
  barren.width = 3;
  barren.height = 3;
  DecompositionParams q;
  q.logits = Mat::Zero(9, 2);
  CHECK(std::isnan(average_saturation(build_gridworld(barren), q)));
}

TEST_CASE("state dependence measures how much a policy swings across states") {
  Mat constant(3, 2);
  constant << 0.2, 0.8, 0.2, 0.8, 0.2, 0.8;
  CHECK(state_dependence(constant, {0, 1, 2}) == Catch::Approx(0.0).margin(1e-12));

  Mat mixed(2, 2);
  mixed << 1.0, 0.0, 0.5, 0.5;
  CHECK(state_dependence(mixed, {0, 1}) == Catch::Approx(0.25).margin(1e-12));

  Mat flip(2, 2);
  flip << 1.0, 0.0, 0.0, 1.0;
  CHECK(state_dependence(flip, {0, 1}) == Catch::Approx(0.5).margin(1e-12));
  CHECK(state_dependence(flip, {0, 0}) == Catch::Approx(0.0).margin(1e-12));

  CHECK_THROWS_AS(state_dependence(flip, {}), std::invalid_argument);
}

TEST_CASE("sampled state dependence is seeded and zero for constant policies") {
  const TabularMdp mdp = build_gridworld(GridworldSpec::four_corners());
  const Mat uniform = uniform_policy(mdp);
  Rng a(42), b(42);
  CHECK(state_dependence_sampled(mdp, uniform, 500, a) == 0.0);

  Mat varied = uniform;
  varied.row(12) << 0.7, 0.1, 0.1, 0.1;
  Rng c(42), d(42);
  const double first = state_dependence_sampled(mdp, varied, 500, c);
  CHECK(first == state_dependence_sampled(mdp, varied, 500, d));
  Rng e(42);
  CHECK_THROWS_AS(state_dependence_sampled(mdp, varied, 0, e), std::invalid_argument);
}

TEST_CASE("total variation distance behaves like a metric") {
  Vec p(3), q(3);
  p << 1, 0, 0;
  q << 1, 0, 0;
  CHECK(tv_distance(p, q) == 0.0);
  q << 0, 1, 0;
  CHECK(tv_distance(p, q) == 1.0);
  q << 0.5, 0.5, 0.0;
  CHECK(tv_distance(p, q) == Catch::Approx(0.5).margin(1e-12));
  CHECK(tv_distance(p, q) == tv_distance(q, p));
  CHECK_THROWS_AS(tv_distance(Vec::Ones(2), Vec::Ones(3)), std::invalid_argument);

  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Vec a(4), b(4), c(4);
    for (int k = 0; k < 4; ++k) {
      a[k] = rng.uniform();
      b[k] = rng.uniform();
      c[k] = rng.uniform();
    }
    a /= a.sum();
    b /= b.sum();
    c /= c.sum();
    CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-12);
  }
}

TEST_CASE("the divergence guarantee is trivial for a part against itself") {
  const auto spec = GridworldSpec::four_corners(5, 5, 1.0);
  const TabularMdp mdp = build_gridworld(spec);
  const auto params = saturated_corners(spec, 4);
  const auto policies = optimal_factor_policies(mdp, params);
  const auto rec = theorem1_check(mdp, params, policies, 2, 2, 7);
  CHECK(rec.gap == 0.0);
  CHECK(rec.actual_tv == 0.0);
  CHECK(rec.holds);
}

TEST_CASE("divergence records carry a recomputable bound") {
  const auto spec = GridworldSpec::four_corners(5, 5, 1.0);
  const TabularMdp mdp = build_gridworld(spec);
  const auto params = saturated_corners(spec, 4);
  const auto policies = optimal_factor_policies(mdp, params);

  const auto rec = theorem1_check(mdp, params, policies, 0, 1, 12);
  CHECK(rec.factor_i == 0);
  CHECK(rec.factor_j == 1);
  CHECK(rec.state == 12);
  CHECK(rec.r_max == 1.0);
  CHECK(rec.bound ==
        Catch::Approx((1.0 - mdp.discount) * rec.gap / (2.0 * rec.r_max)).margin(1e-15));
  CHECK(rec.actual_tv >= 0.0);
  CHECK(rec.actual_tv <= 1.0 + 1e-12);

  CHECK_THROWS_AS(theorem1_check(mdp, params, policies, -1, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(theorem1_check(mdp, params, policies, 0, 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(theorem1_check(mdp, params, policies, 0, 1, 25), std::invalid_argument);

  TabularMdp negative = mdp;
  negative.reward[3] = -1.0;
  CHECK_THROWS_AS(theorem1_check(negative, params, policies, 0, 1, 0), std::invalid_argument);
}

TEST_CASE("the divergence sweep covers every pair and state and holds when saturated") {
  const auto spec = GridworldSpec::four_corners(5, 5, 1.0);
  const TabularMdp mdp = build_gridworld(spec);
  const auto params = saturated_corners(spec, 4);
  const auto policies = optimal_factor_policies(mdp, params);

  const auto sweep = theorem1_sweep(mdp, params, policies);
  REQUIRE(sweep.size() == 4u * 4u * 25u);
  for (const auto& rec : sweep) {
    CHECK(rec.holds == (rec.actual_tv >= rec.bound - 1e-9));
    CHECK(rec.holds);
  }
  // a single check reproduces its sweep entry
  const auto rec = theorem1_check(mdp, params, policies, 1, 3, 6);
  bool found = false;
  for (const auto& r : sweep)
    if (r.factor_i == 1 && r.factor_j == 3 && r.state == 6) {
      found = true;
      CHECK(r.gap == rec.gap);
      CHECK(r.actual_tv == rec.actual_tv);
    }
  CHECK(found);
}

TEST_CASE("the collect-everything score adds values policy by policy") {
  const TabularMdp mdp = build_gridworld(GridworldSpec::four_corners(5, 5, 1.0));
  const auto vi = value_iteration(mdp, mdp.reward, mdp.discount);
  const Vec u = policy_evaluation(mdp, mdp.reward, vi.policy, mdp.discount);
  const Vec& mu = mdp.start_distribution;

  GridworldSpec barren;
  barren.width = 3;
  barren.height = 3;
  const TabularMdp empty = build_gridworld(barren);
  CHECK(total_value(empty, {oracles::make_policy(std::vector<int>(9, 0))},
                    empty.start_distribution) == 0.0);

  const std::vector<DeterministicPolicy> three(3, vi.policy);
  CHECK(total_value(mdp, three, mu) == Catch::Approx(3.0 * mu.dot(u)).margin(1e-9));
  CHECK_THROWS_AS(total_value(mdp, three, Vec::Ones(3)), std::invalid_argument);

  // against an independently rolled estimate from a fixed start
  Vec point = Vec::Zero(mdp.n_states);
  point[12] = 1.0;
  const int horizon = 1500;
  const auto mc = oracles::mc_policy_value(mdp, vi.policy.as_matrix(mdp.n_actions), mdp.reward, 12,
                                           100000, horizon, 321);
  const double slack =
      3.0 * mc.se + oracles::mc_truncation_bound(mdp, mdp.reward, horizon);
  CHECK(std::abs(total_value(mdp, {vi.policy}, point) - mc.mean) <= slack);
}

TEST_CASE("uniform weights make the objective halves sum to the total value") {
  const TabularMdp mdp = build_gridworld(GridworldSpec::four_corners(5, 5, 1.0));
  Rng rng(14);
  for (const double c : {1.0, 2.0}) {
    const auto params = random_decomposition(mdp.n_states, 3, 1.0, rng);
    const auto policies = optimal_factor_policies(mdp, params);
    const auto report = evaluate_objective(mdp, params, AlphaScheme::uniform(c), policies);
    const double total = total_value(mdp, policies, mdp.start_distribution);
    CHECK(lemma1_residual(report, c, total) <= 1e-9);
    // halves scale linearly in the weight
    if (c == 2.0) {
      const auto base = evaluate_objective(mdp, params, AlphaScheme::uniform(1.0), policies);
      CHECK(report.j_nontrivial == Catch::Approx(2.0 * base.j_nontrivial).margin(1e-9));
      CHECK(report.j_independent == Catch::Approx(2.0 * base.j_independent).margin(1e-9));
    }
  }

  GridworldSpec barren;
  barren.width = 3;
  barren.height = 3;
  const TabularMdp empty = build_gridworld(barren);
  const auto params = random_decomposition(9, 2, 1.0, rng);
  const auto policies = optimal_factor_policies(empty, params);
  const auto report = evaluate_objective(empty, params, AlphaScheme::uniform(1.0), policies);
  CHECK(lemma1_residual(report, 1.0, total_value(empty, policies, empty.start_distribution)) ==
        0.0);

  const auto soft =
      evaluate_objective(mdp, random_decomposition(25, 2, 1.0, rng), AlphaScheme::softened_min());
  CHECK_THROWS_AS(lemma1_residual(soft, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("sensitivity compares policy collections symmetrically") {
  const TabularMdp chain = oracles::two_state_chain();
  const Vec& mu = chain.start_distribution;
  const std::vector<DeterministicPolicy> optimal = {oracles::make_policy({1, 0})};
  const std::vector<DeterministicPolicy> stubborn = {oracles::make_policy({0, 0})};

  CHECK(sensitivity(chain, optimal, optimal, mu) == 0.0);
  CHECK(sensitivity(chain, optimal, stubborn, mu) == Catch::Approx(0.5).margin(1e-10));
  CHECK(sensitivity(chain, optimal, stubborn, mu) ==
        sensitivity(chain, stubborn, optimal, mu));

  CHECK_THROWS_AS(sensitivity(chain, optimal, {}, mu), std::invalid_argument);
  CHECK_THROWS_AS(sensitivity(chain, {}, {}, mu), std::invalid_argument);
}
