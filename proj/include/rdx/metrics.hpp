#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rdx/decomp.hpp"
#include "rdx/mdp.hpp"
#include "rdx/planner.hpp"

namespace rdx {

// How close a state's reward split is to winner-take-all: 1 when one part
// owns everything, 0 when the split is uniform. Undefined where the
// environment reward is zero.
inline double saturation_score(const Vec& decomposed, double env_reward) {
  const auto n = decomposed.size();
  if (n <= 1) throw std::invalid_argument("saturation_score: need at least two parts");
  if (env_reward == 0.0)
    throw std::domain_error("saturation_score: undefined at zero environment reward");
  const double top_share = (decomposed / env_reward).maxCoeff();
  return (top_share - 1.0 / n) / (1.0 - 1.0 / n);
}

// Saturation averaged over rewarding states, weighted by how often a
// uniform-random walker visits them in steady state. NaN when the MDP has no
// rewarding state.
inline double average_saturation(const TabularMdp& mdp, const DecompositionParams& params) {
  const Vec stat = stationary_distribution(transition_under(mdp, uniform_policy(mdp)));
  const Mat shares = softmax_rows(params.logits);
  double mass = 0.0, acc = 0.0;
  const int n = params.n_factors();
  for (int s = 0; s < mdp.n_states; ++s) {
    if (mdp.reward[s] == 0.0) continue;
    const double score = (shares.row(s).maxCoeff() - 1.0 / n) / (1.0 - 1.0 / n);
    acc += stat[s] * score;
    mass += stat[s];
  }
  if (mass == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return acc / mass;
}

// Mean over actions of the population std over the listed states of the
// action's probability: 0 for a state-independent policy.
inline double state_dependence(const Mat& policy, const std::vector<int>& states) {
  if (states.empty()) throw std::invalid_argument("state_dependence: empty state list");
  const auto n_actions = policy.cols();
  double acc = 0.0;
  for (Eigen::Index a = 0; a < n_actions; ++a) {
    double mean = 0.0;
    for (const int s : states) mean += policy(s, a);
    mean /= static_cast<double>(states.size());
    double var = 0.0;
    for (const int s : states) {
      const double d = policy(s, a) - mean;
      var += d * d;
    }
    acc += std::sqrt(var / static_cast<double>(states.size()));
  }
  return acc / static_cast<double>(n_actions);
}

// Convenience: score the policy over the states it actually visits — a
// seeded rollout from the start distribution under the policy itself.
inline double state_dependence_sampled(const TabularMdp& mdp, const Mat& policy, int steps,
                                       Rng& rng) {
  if (steps <= 0) throw std::invalid_argument("state_dependence_sampled: steps must be positive");
  const int start = rng.categorical(mdp.start_distribution);
  const Trajectory traj = simulate_trajectory(mdp, policy, start, steps, rng);
  std::vector<int> states;
  states.reserve(traj.steps.size());
  for (const Step& st : traj.steps) states.push_back(st.state);
  return state_dependence(policy, states);
}

inline double tv_distance(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) throw std::invalid_argument("tv_distance: length mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

// One cell of the divergence guarantee: if part i's value under its own
// policy beats its value under part j's policy by a gap C > 0, the two
// policies' normalized occupancies from that state must differ in total
// variation by at least (1 - gamma) * C / (2 * max reward).
struct TheoremOneRecord {
  int factor_i = 0;
  int factor_j = 0;
  int state = 0;
  double gap = 0.0;        // U_i under policy i minus U_i under policy j
  double r_max = 0.0;      // largest environment reward
  double bound = 0.0;      // (1 - gamma) * gap / (2 * r_max)
  double actual_tv = 0.0;  // TV between the normalized occupancy rows
  bool holds = false;      // actual_tv >= bound - 1e-9
};

namespace detail {

struct TheoremOneCache {
  std::vector<Mat> u_by_policy;     // [j]: S x n
  std::vector<Mat> occupancy_rows;  // [j]: normalized occupancy, rows by state
  double r_max = 0.0;
  double gamma = 0.0;
};

inline TheoremOneCache theorem1_cache(const TabularMdp& mdp, const DecompositionParams& params,
                                      const std::vector<DeterministicPolicy>& policies) {
  if ((mdp.reward.array() < 0.0).any())
    throw std::invalid_argument("theorem1_check: rewards must be non-negative");
  TheoremOneCache cache;
  cache.gamma = mdp.discount;
  cache.r_max = mdp.reward.maxCoeff();
  const Mat rewards = decomposed_rewards(mdp, params);
  for (const auto& policy : policies) {
    PolicySolver solver(transition_under(mdp, policy), mdp.discount);
    cache.u_by_policy.push_back(solver.evaluate_all(rewards));
    cache.occupancy_rows.push_back((1.0 - mdp.discount) * solver.occupancy_psi());
  }
  return cache;
}

inline TheoremOneRecord theorem1_record(const TheoremOneCache& cache, int i, int j, int s) {
  TheoremOneRecord rec;
  rec.factor_i = i;
  rec.factor_j = j;
  rec.state = s;
  rec.gap = cache.u_by_policy[i](s, i) - cache.u_by_policy[j](s, i);
  rec.r_max = cache.r_max;
  rec.bound = cache.r_max > 0.0 ? (1.0 - cache.gamma) * rec.gap / (2.0 * cache.r_max) : 0.0;
  rec.actual_tv =
      tv_distance(cache.occupancy_rows[i].row(s).transpose(),
                  cache.occupancy_rows[j].row(s).transpose());
  rec.holds = rec.actual_tv >= rec.bound - 1e-9;
  return rec;
}

}  // namespace detail

inline TheoremOneRecord theorem1_check(const TabularMdp& mdp, const DecompositionParams& params,
                                       const std::vector<DeterministicPolicy>& policies, int i,
                                       int j, int s) {
  const int n = static_cast<int>(policies.size());
  if (i < 0 || i >= n || j < 0 || j >= n)
    throw std::invalid_argument("theorem1_check: factor index out of range");
  if (s < 0 || s >= mdp.n_states) throw std::invalid_argument("theorem1_check: state out of range");
  return detail::theorem1_record(detail::theorem1_cache(mdp, params, policies), i, j, s);
}

// every ordered pair at every state
inline std::vector<TheoremOneRecord> theorem1_sweep(const TabularMdp& mdp,
                                                    const DecompositionParams& params,
                                                    const std::vector<DeterministicPolicy>& policies) {
  const auto cache = detail::theorem1_cache(mdp, params, policies);
  const int n = static_cast<int>(policies.size());
  std::vector<TheoremOneRecord> out;
  out.reserve(static_cast<std::size_t>(n) * n * mdp.n_states);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int s = 0; s < mdp.n_states; ++s) out.push_back(detail::theorem1_record(cache, i, j, s));
  return out;
}

// Sum over parts of the start-weighted environment-reward value of each
// part's policy — the collect-everything score of a policy collection.
inline double total_value(const TabularMdp& mdp, const std::vector<DeterministicPolicy>& policies,
                          const Vec& mu) {
  if (mu.size() != mdp.n_states) throw std::invalid_argument("total_value: mu length mismatch");
  double acc = 0.0;
  for (const auto& policy : policies)
    acc += mu.dot(policy_evaluation(mdp, mdp.reward, policy, mdp.discount));
  return acc;
}

// Under weights uniformly equal to c, cross values plus own values add up to
// c times the total value; returns |j_independent + j_nontrivial - c * total|.
inline double lemma1_residual(const ObjectiveReport& report, double c, double total) {
  if (report.alpha.off_diag != c || (report.alpha.diag.array() != c).any())
    throw std::invalid_argument("lemma1_residual: report was not computed under uniform weights");
  return std::abs(report.j_independent + report.j_nontrivial - c * total);
}

// Gap between two policy collections' collect-everything scores.
inline double sensitivity(const TabularMdp& mdp, const std::vector<DeterministicPolicy>& a,
                          const std::vector<DeterministicPolicy>& b, const Vec& mu) {
  if (a.size() != b.size())
    throw std::invalid_argument("sensitivity: collections must have the same size");
  if (a.empty()) throw std::invalid_argument("sensitivity: empty policy collections");
  return std::abs(total_value(mdp, a, mu) - total_value(mdp, b, mu));
}

}  // namespace rdx
