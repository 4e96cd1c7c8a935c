#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rdx/mdp.hpp"
#include "rdx/planner.hpp"
#include "rdx/qlearn.hpp"

namespace rdx {

// MDP whose action k means "do whatever policy k would do here for one
// step". Same states, rewards, discount and starts as the base MDP.
struct InducedMdp {
  TabularMdp mdp;
  Eigen::MatrixXi base_action;  // S x n: the base action option k takes at s
};

inline InducedMdp induce(const TabularMdp& base, const std::vector<DeterministicPolicy>& policies) {
  base.validate();
  if (policies.empty()) throw std::invalid_argument("induce: need at least one policy");
  const int n = static_cast<int>(policies.size());
  InducedMdp out;
  out.mdp.n_states = base.n_states;
  out.mdp.n_actions = n;
  out.mdp.reward = base.reward;
  out.mdp.discount = base.discount;
  out.mdp.start_distribution = base.start_distribution;
  out.mdp.transition.assign(n, Mat::Zero(base.n_states, base.n_states));
  out.base_action.resize(base.n_states, n);
  for (int k = 0; k < n; ++k) {
    if (policies[k].size() != base.n_states)
      throw std::invalid_argument("induce: policy length mismatch");
    for (int s = 0; s < base.n_states; ++s) {
      const int a = policies[k].at(s);
      if (a < 0 || a >= base.n_actions)
        throw std::invalid_argument("induce: policy action out of range");
      out.base_action(s, k) = a;
      out.mdp.transition[k].row(s) = base.transition[a].row(s);
    }
  }
  out.mdp.validate();
  return out;
}

struct ControlConfig {
  long long budget = 4000;
  int eval_interval = 100;
  double learning_rate = 0.1;
  EpsilonSchedule epsilon{1.0, 0.01, 2000};
  double vi_tol = 1e-10;

  void validate() const {
    if (budget < 1) throw std::invalid_argument("ControlConfig: budget must be positive");
    if (eval_interval < 1)
      throw std::invalid_argument("ControlConfig: eval_interval must be positive");
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("ControlConfig: learning_rate must be positive");
    epsilon.validate();
  }
};

struct CurvePoint {
  long long step = 0;
  double value = 0.0;  // exact start-weighted value of the current greedy policy
};

// Online tabular Q-learning on the MDP's own reward, evaluated exactly: at
// step 0 and every eval_interval steps the current greedy policy is scored by
// start-weighted policy evaluation. Target convention matches PolicySet.
inline std::vector<CurvePoint> learning_curve(const TabularMdp& mdp, const ControlConfig& cfg,
                                              std::uint64_t seed) {
  mdp.validate();
  cfg.validate();
  Rng rng(seed);
  Mat q = Mat::Zero(mdp.n_states, mdp.n_actions);
  std::vector<CurvePoint> curve;
  const auto evaluate_greedy = [&](long long step) {
    DeterministicPolicy greedy;
    greedy.action.resize(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) greedy.action[s] = greedy_action(q, s);
    curve.push_back(
        {step, mdp.start_distribution.dot(
                   policy_evaluation(mdp, mdp.reward, greedy, mdp.discount))});
  };
  int s = rng.categorical(mdp.start_distribution);
  evaluate_greedy(0);
  for (long long t = 0; t < cfg.budget; ++t) {
    const int a = epsilon_greedy_action(q, s, epsilon_at(cfg.epsilon, t), rng);
    const int next = rng.categorical(mdp.transition[a].row(s));
    const double target = mdp.reward[next] + mdp.discount * q.row(next).maxCoeff();
    q(s, a) += cfg.learning_rate * (target - q(s, a));
    s = next;
    if ((t + 1) % cfg.eval_interval == 0) evaluate_greedy(t + 1);
  }
  return curve;
}

// Meta-controller over the option policies: plain Q-learning on the induced
// MDP.
inline std::vector<CurvePoint> train_meta_controller(const InducedMdp& induced,
                                                     const ControlConfig& cfg,
                                                     std::uint64_t seed) {
  return learning_curve(induced.mdp, cfg, seed);
}

struct GeneralizationResult {
  std::vector<CurvePoint> induced_curve;   // meta-controller on the restricted task
  std::vector<CurvePoint> baseline_curve;  // flat learner on the restricted task
};

// Restricts the base task's rewards to `region`, then races a meta-controller
// built from the given (unrestricted-task) policies against a from-scratch
// flat learner, with identical budgets and seeds.
inline GeneralizationResult generalization_experiment(const TabularMdp& base,
                                                      const std::function<bool(int)>& region,
                                                      const std::vector<DeterministicPolicy>& policies,
                                                      const ControlConfig& cfg,
                                                      std::uint64_t seed) {
  const TabularMdp restricted = restrict_rewards(base, region);
  GeneralizationResult out;
  out.induced_curve = train_meta_controller(induce(restricted, policies), cfg, seed);
  out.baseline_curve = learning_curve(restricted, cfg, seed);
  return out;
}

// Mean curve value over the curve's first half — the early-learning score.
inline double first_half_mean(const std::vector<CurvePoint>& curve) {
  if (curve.empty()) throw std::invalid_argument("first_half_mean: empty curve");
  const std::size_t half = (curve.size() + 1) / 2;
  double acc = 0.0;
  for (std::size_t k = 0; k < half; ++k) acc += curve[k].value;
  return acc / static_cast<double>(half);
}

}  // namespace rdx
