#pragma once

// Reference implementations the tests trust instead of the library: small
// hand-enumerable MDPs, Monte-Carlo returns rolled with an independent loop,
// central finite differences, an exact truncated-rollout gradient, and a
// linear-solve stationary distribution.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rdx/decomp.hpp"
#include "rdx/mdp.hpp"
#include "rdx/planner.hpp"
#include "rdx/rng.hpp"

namespace oracles {

using rdx::Mat;
using rdx::Vec;

// Two states, actions {stay, move}, reward 1 at s1, discount 1/2.
// Hand-solved Bellman system: Q* = [[0.5, 1], [2, 1.5]], V* = (1, 2),
// greedy policy (move, stay).
inline rdx::TabularMdp two_state_chain() {
  rdx::TabularMdp mdp;
  mdp.n_states = 2;
  mdp.n_actions = 2;
  mdp.discount = 0.5;
  mdp.reward = Vec::Zero(2);
  mdp.reward[1] = 1.0;
  mdp.start_distribution = Vec::Constant(2, 0.5);
  Mat stay = Mat::Identity(2, 2);
  Mat move(2, 2);
  move << 0, 1, 1, 0;
  mdp.transition = {stay, move};
  return mdp;
}

// Single action that swaps the two states every step.
inline rdx::TabularMdp two_cycle(double gamma = 0.5) {
  rdx::TabularMdp mdp;
  mdp.n_states = 2;
  mdp.n_actions = 1;
  mdp.discount = gamma;
  mdp.reward = Vec::Zero(2);
  mdp.start_distribution = Vec::Constant(2, 0.5);
  Mat swap(2, 2);
  swap << 0, 1, 1, 0;
  mdp.transition = {swap};
  return mdp;
}

inline rdx::TabularMdp single_state(double reward = 0.0, double gamma = 0.5) {
  rdx::TabularMdp mdp;
  mdp.n_states = 1;
  mdp.n_actions = 1;
  mdp.discount = gamma;
  mdp.reward = Vec::Constant(1, reward);
  mdp.start_distribution = Vec::Constant(1, 1.0);
  mdp.transition = {Mat::Constant(1, 1, 1.0)};
  return mdp;
}

inline rdx::DeterministicPolicy make_policy(std::vector<int> actions) {
  rdx::DeterministicPolicy p;
  p.action = std::move(actions);
  return p;
}

inline rdx::DeterministicPolicy random_policy(const rdx::TabularMdp& mdp, rdx::Rng& rng) {
  rdx::DeterministicPolicy p;
  p.action.resize(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) p.action[s] = rng.uniform_int(mdp.n_actions);
  return p;
}

inline Mat random_stochastic_policy(const rdx::TabularMdp& mdp, rdx::Rng& rng) {
  Mat p(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      p(s, a) = rng.uniform() + 1e-3;
      sum += p(s, a);
    }
    p.row(s) /= sum;
  }
  return p;
}

struct McValue {
  double mean = 0.0;
  double se = 0.0;
};

// Discounted return sum_t gamma^t reward(s_t) from `start`, averaged over
// rollouts of fixed horizon; the sampling loop is written out here so it
// shares nothing with the library's simulator.
inline McValue mc_policy_value(const rdx::TabularMdp& mdp, const Mat& policy, const Vec& reward,
                               int start, int n_rollouts, int horizon, std::uint64_t seed) {
  rdx::Rng rng(seed);
  double acc = 0.0, acc_sq = 0.0;
  for (int k = 0; k < n_rollouts; ++k) {
    int s = start;
    double ret = 0.0, disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
      ret += disc * reward[s];
      double u = rng.uniform(), cum = 0.0;
      int a = mdp.n_actions - 1;
      for (int cand = 0; cand < mdp.n_actions; ++cand) {
        cum += policy(s, cand);
        if (u < cum) {
          a = cand;
          break;
        }
      }
      u = rng.uniform();
      cum = 0.0;
      int next = mdp.n_states - 1;
      for (int cand = 0; cand < mdp.n_states; ++cand) {
        cum += mdp.transition[a](s, cand);
        if (u < cum) {
          next = cand;
          break;
        }
      }
      s = next;
      disc *= mdp.discount;
    }
    acc += ret;
    acc_sq += ret * ret;
  }
  McValue out;
  out.mean = acc / n_rollouts;
  const double var =
      (acc_sq / n_rollouts - out.mean * out.mean) * n_rollouts / (n_rollouts - 1.0);
  out.se = std::sqrt(std::max(0.0, var) / n_rollouts);
  return out;
}

// bias of a horizon-H truncated return estimate
inline double mc_truncation_bound(const rdx::TabularMdp& mdp, const Vec& reward, int horizon) {
  return std::pow(mdp.discount, horizon) * reward.cwiseAbs().maxCoeff() /
         (1.0 - mdp.discount);
}

// Central finite differences of the frozen-policy, frozen-weight objective.
inline Mat fd_gradient(const rdx::TabularMdp& mdp, const rdx::DecompositionParams& params,
                       const std::vector<rdx::DeterministicPolicy>& policies,
                       const rdx::AlphaSnapshot& alpha, double h) {
  rdx::DecompositionParams probe = params;
  Mat g(params.logits.rows(), params.logits.cols());
  for (Eigen::Index s = 0; s < g.rows(); ++s) {
    for (Eigen::Index k = 0; k < g.cols(); ++k) {
      const double saved = probe.logits(s, k);
      probe.logits(s, k) = saved + h;
      const double plus =
          rdx::evaluate_objective_frozen(mdp, probe, policies, alpha).j_disentangled;
      probe.logits(s, k) = saved - h;
      const double minus =
          rdx::evaluate_objective_frozen(mdp, probe, policies, alpha).j_disentangled;
      probe.logits(s, k) = saved;
      g(s, k) = (plus - minus) / (2.0 * h);
    }
  }
  return g;
}

// Exact expectation of the truncated-rollout gradient: for each start and
// ordered pair (i, j), the state distribution under policy j is propagated
// for `cutoff` steps and the discounted softmax-share gradients of part i are
// accumulated, averaged over starts. Matches what sampling would converge to.
inline Mat truncated_gradient(const rdx::TabularMdp& mdp, const rdx::DecompositionParams& params,
                              const std::vector<rdx::DeterministicPolicy>& policies,
                              const rdx::AlphaSnapshot& alpha, const std::vector<int>& starts,
                              int cutoff) {
  const int n = params.n_factors();
  Mat demand = Mat::Zero(mdp.n_states, n);
  for (int j = 0; j < n; ++j) {
    const Mat pj = rdx::transition_under(mdp, policies[j]);
    for (const int start : starts) {
      Eigen::RowVectorXd dist = Eigen::RowVectorXd::Zero(mdp.n_states);
      dist[start] = 1.0;
      double disc = 1.0;
      for (int t = 0; t < cutoff; ++t) {
        for (int i = 0; i < n; ++i) {
          const double w =
              (i == j ? alpha.diag(start, i) : -alpha.off_diag) / starts.size();
          demand.col(i) += (w * disc) * dist.transpose();
        }
        if (t + 1 < cutoff) {
          dist = dist * pj;
          disc *= mdp.discount;
        }
      }
    }
  }
  const Mat p = rdx::softmax_rows(params.logits);
  Mat g = Mat::Zero(mdp.n_states, n);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int k = 0; k < n; ++k) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i)
        acc += demand(s, i) * p(s, i) * ((i == k ? 1.0 : 0.0) - p(s, k));
      g(s, k) = mdp.reward[s] * acc;
    }
  return g;
}

// What truncating rollouts at `cutoff` can cost at most, entrywise: each
// dropped step contributes at worst |weight| * gamma^t times the largest
// single-state share gradient, summed over the tail and averaged over starts.
inline double mc_tail_bound(const rdx::TabularMdp& mdp, const rdx::DecompositionParams& params,
                            const rdx::AlphaSnapshot& alpha, const std::vector<int>& starts,
                            int cutoff) {
  const int n = params.n_factors();
  const Mat p = rdx::softmax_rows(params.logits);
  double g_max = 0.0;
  for (int s = 0; s < mdp.n_states; ++s)
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        const double jac = p(s, i) * ((i == k ? 1.0 : 0.0) - p(s, k));
        g_max = std::max(g_max, std::abs(mdp.reward[s] * jac));
      }
  double weight_sum = 0.0;
  for (const int start : starts)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        weight_sum += std::abs(i == j ? alpha.diag(start, i) : alpha.off_diag);
  const double tail = std::pow(mdp.discount, cutoff) / (1.0 - mdp.discount);
  return weight_sum / static_cast<double>(starts.size()) * tail * g_max;
}

// Stationary distribution of a row-stochastic matrix by least squares on
// (P^T - I) v = 0, sum v = 1 — no power iteration involved.
inline Vec linear_stationary(const Mat& p) {
  const auto n = p.rows();
  Mat a(n + 1, n);
  a.topRows(n) = p.transpose() - Mat::Identity(n, n);
  a.bottomRows(1).setOnes();
  Vec b = Vec::Zero(n + 1);
  b[n] = 1.0;
  return a.colPivHouseholderQr().solve(b);
}

}  // namespace oracles
