#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rdx/mdp.hpp"
#include "rdx/planner.hpp"
#include "rdx/rng.hpp"

namespace rdx {

// Learnable split of the environment reward into n additive parts. Each state
// owns a row of logits; part i's share of reward(s) is softmax(logits(s,:))_i,
// so the parts always sum back to the environment reward exactly.
struct DecompositionParams {
  Mat logits;  // S x n
  std::uint64_t version = 0;

  int n_states() const { return static_cast<int>(logits.rows()); }
  int n_factors() const { return static_cast<int>(logits.cols()); }
};

inline DecompositionParams random_decomposition(int n_states, int n_factors, double scale,
                                                Rng& rng) {
  if (n_states <= 0 || n_factors <= 0)
    throw std::invalid_argument("random_decomposition: sizes must be positive");
  DecompositionParams p;
  p.logits.resize(n_states, n_factors);
  for (int s = 0; s < n_states; ++s)
    for (int i = 0; i < n_factors; ++i) p.logits(s, i) = scale * rng.normal();
  return p;
}

// numerically stable row-wise softmax
inline Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const Eigen::RowVectorXd shifted = logits.row(s).array() - logits.row(s).maxCoeff();
    const Eigen::RowVectorXd e = shifted.array().exp();
    out.row(s) = e / e.sum();
  }
  return out;
}

// the n reward shares at one state
inline Vec softmax_decompose(const DecompositionParams& params, int s, double env_reward) {
  if (s < 0 || s >= params.n_states())
    throw std::invalid_argument("softmax_decompose: state out of range");
  const Eigen::RowVectorXd shifted = params.logits.row(s).array() - params.logits.row(s).maxCoeff();
  const Eigen::RowVectorXd e = shifted.array().exp();
  return (env_reward / e.sum()) * e.transpose();
}

// S x n matrix of decomposed rewards; column i is reward part i
inline Mat decomposed_rewards(const TabularMdp& mdp, const DecompositionParams& params) {
  if (params.n_states() != mdp.n_states)
    throw std::invalid_argument("decomposed_rewards: state count mismatch");
  return (softmax_rows(params.logits).array().colwise() * mdp.reward.array()).matrix();
}

// Weights on the objective's value terms. `uniform(c)` weights everything by
// c. `softened_min` upweights the currently weakest parts: the diagonal
// weight of part i is scale * softmax(-temperature * diag_values)_i, while
// cross terms stay at 1.
struct AlphaScheme {
  enum class Kind { kUniform, kSoftenedMin };
  Kind kind = Kind::kSoftenedMin;
  double c = 1.0;
  double scale = 10.0;
  double temperature = 2.0;

  static AlphaScheme uniform(double c = 1.0) {
    AlphaScheme a;
    a.kind = Kind::kUniform;
    a.c = c;
    return a;
  }
  static AlphaScheme softened_min(double scale = 10.0, double temperature = 2.0) {
    AlphaScheme a;
    a.kind = Kind::kSoftenedMin;
    a.scale = scale;
    a.temperature = temperature;
    return a;
  }
};

// n x n weight matrix for one state given that state's n diagonal values
inline Mat alpha_weights(const AlphaScheme& scheme, const Vec& diag_values) {
  const auto n = diag_values.size();
  if (n <= 0) throw std::invalid_argument("alpha_weights: empty value vector");
  if (!diag_values.allFinite()) throw std::invalid_argument("alpha_weights: values must be finite");
  if (scheme.kind == AlphaScheme::Kind::kUniform) return Mat::Constant(n, n, scheme.c);
  if (!(scheme.scale > 0.0) || !(scheme.temperature > 0.0))
    throw std::invalid_argument("alpha_weights: scale and temperature must be positive");
  const Vec scaled = -scheme.temperature * diag_values;
  const Vec e = (scaled.array() - scaled.maxCoeff()).exp().matrix();
  Mat a = Mat::Ones(n, n);
  a.diagonal() = (scheme.scale / e.sum()) * e;
  return a;
}

// Per-state weights held fixed while the logits move: diag(s, i) is the
// diagonal weight at state s, every off-diagonal weight is the same scalar.
struct AlphaSnapshot {
  Mat diag;  // S x n
  double off_diag = 1.0;
};

inline AlphaSnapshot alpha_snapshot(const AlphaScheme& scheme, const Mat& diag_value_table) {
  AlphaSnapshot snap;
  snap.diag.resize(diag_value_table.rows(), diag_value_table.cols());
  for (Eigen::Index s = 0; s < diag_value_table.rows(); ++s)
    snap.diag.row(s) = alpha_weights(scheme, diag_value_table.row(s).transpose()).diagonal();
  snap.off_diag = scheme.kind == AlphaScheme::Kind::kUniform ? scheme.c : 1.0;
  return snap;
}

struct ObjectiveReport {
  double j_independent = 0.0;  // weighted cross values, the smaller the better
  double j_nontrivial = 0.0;   // weighted own values, the larger the better
  double j_disentangled = 0.0;
  Mat value_matrix;                   // n x n, (i, j) = mu-average of U_i under policy j
  std::vector<Mat> per_state_values;  // per state: n x n with the same layout
  AlphaSnapshot alpha;
};

// Greedy optimal policy for every reward part; `warm` (optional, in/out)
// carries the per-part Q tables across repeated calls.
inline std::vector<DeterministicPolicy> optimal_factor_policies(const TabularMdp& mdp,
                                                                const DecompositionParams& params,
                                                                double vi_tol = 1e-10,
                                                                std::vector<Mat>* warm = nullptr) {
  const Mat rewards = decomposed_rewards(mdp, params);
  const int n = params.n_factors();
  if (warm != nullptr && warm->empty())
    warm->assign(n, Mat::Zero(mdp.n_states, mdp.n_actions));
  if (warm != nullptr && static_cast<int>(warm->size()) != n)
    throw std::invalid_argument("optimal_factor_policies: warm table count mismatch");
  std::vector<DeterministicPolicy> policies;
  policies.reserve(n);
  for (int i = 0; i < n; ++i) {
    auto res = value_iteration(mdp, rewards.col(i), mdp.discount, vi_tol,
                               warm != nullptr ? &(*warm)[i] : nullptr);
    if (warm != nullptr) (*warm)[i] = res.q;
    policies.push_back(std::move(res.policy));
  }
  return policies;
}

namespace detail {

// Everything the objective and the exact gradient share: U_i under every
// policy j, plus each policy's occupancy when requested.
struct CrossValues {
  std::vector<Mat> u_by_policy;  // [j]: S x n, column i = U_i under policy j
  Mat diag_table;                // S x n, (s, i) = U_i under policy i at s
  std::vector<Mat> psi_by_policy;
};

inline CrossValues cross_values(const TabularMdp& mdp, const Mat& rewards,
                                const std::vector<DeterministicPolicy>& policies,
                                bool want_occupancy) {
  const int n = static_cast<int>(policies.size());
  CrossValues cv;
  cv.u_by_policy.reserve(n);
  cv.diag_table.resize(mdp.n_states, n);
  if (want_occupancy) cv.psi_by_policy.reserve(n);
  for (int j = 0; j < n; ++j) {
    PolicySolver solver(transition_under(mdp, policies[j]), mdp.discount);
    cv.u_by_policy.push_back(solver.evaluate_all(rewards));
    cv.diag_table.col(j) = cv.u_by_policy.back().col(j);
    if (want_occupancy) cv.psi_by_policy.push_back(solver.occupancy_psi());
  }
  return cv;
}

inline ObjectiveReport assemble_report(const TabularMdp& mdp, const CrossValues& cv,
                                       const AlphaSnapshot& alpha) {
  const int n = static_cast<int>(cv.u_by_policy.size());
  ObjectiveReport rep;
  rep.alpha = alpha;
  rep.value_matrix = Mat::Zero(n, n);
  rep.per_state_values.assign(mdp.n_states, Mat::Zero(n, n));
  for (int s = 0; s < mdp.n_states; ++s) {
    const double mu = mdp.start_distribution[s];
    Mat& m = rep.per_state_values[s];
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) m(i, j) = cv.u_by_policy[j](s, i);
    rep.value_matrix += mu * m;
    for (int i = 0; i < n; ++i) {
      rep.j_nontrivial += mu * alpha.diag(s, i) * m(i, i);
      for (int j = 0; j < n; ++j)
        if (j != i) rep.j_independent += mu * alpha.off_diag * m(i, j);
    }
  }
  rep.j_disentangled = rep.j_nontrivial - rep.j_independent;
  return rep;
}

}  // namespace detail

// Objective with the weights frozen to `alpha` (policies also held fixed).
inline ObjectiveReport evaluate_objective_frozen(const TabularMdp& mdp,
                                                 const DecompositionParams& params,
                                                 const std::vector<DeterministicPolicy>& policies,
                                                 const AlphaSnapshot& alpha) {
  const Mat rewards = decomposed_rewards(mdp, params);
  const auto cv = detail::cross_values(mdp, rewards, policies, false);
  return detail::assemble_report(mdp, cv, alpha);
}

// Objective under given policies; weights recomputed from the current
// diagonal values via `scheme`.
inline ObjectiveReport evaluate_objective(const TabularMdp& mdp, const DecompositionParams& params,
                                          const AlphaScheme& scheme,
                                          const std::vector<DeterministicPolicy>& policies) {
  const Mat rewards = decomposed_rewards(mdp, params);
  const auto cv = detail::cross_values(mdp, rewards, policies, false);
  return detail::assemble_report(mdp, cv, alpha_snapshot(scheme, cv.diag_table));
}

// Objective at the per-part optimal policies (computed by value iteration).
inline ObjectiveReport evaluate_objective(const TabularMdp& mdp, const DecompositionParams& params,
                                          const AlphaScheme& scheme, double vi_tol = 1e-10) {
  return evaluate_objective(mdp, params, scheme,
                            optimal_factor_policies(mdp, params, vi_tol));
}

// Exact objective gradient with respect to the logits, treating the policies
// and the weights as constants. Derivation: the objective is a weighted sum
// of evaluated values, each value is occupancy-weighted decomposed reward,
// and the reward shares differentiate through the softmax, giving
//   dJ/dF(s,k) = reward(s) * p_k(s) * (c_k(s) - sum_i c_i(s) p_i(s))
// where p is the share vector at s and c_i(s) is the total occupancy-weighted
// demand for part i at s across all weighted (i, j) terms.
inline Mat gradient_exact(const TabularMdp& mdp, const DecompositionParams& params,
                          const std::vector<DeterministicPolicy>& policies,
                          const AlphaSnapshot& alpha) {
  const int n = params.n_factors();
  if (static_cast<int>(policies.size()) != n)
    throw std::invalid_argument("gradient_exact: policy count mismatch");
  Mat demand = Mat::Zero(mdp.n_states, n);  // c
  const Vec& mu = mdp.start_distribution;
  for (int j = 0; j < n; ++j) {
    const Mat psi = PolicySolver(transition_under(mdp, policies[j]), mdp.discount).occupancy_psi();
    for (int i = 0; i < n; ++i) {
      Vec w(mdp.n_states);
      for (int s = 0; s < mdp.n_states; ++s)
        w[s] = mu[s] * (i == j ? alpha.diag(s, i) : -alpha.off_diag);
      demand.col(i) += psi.transpose() * w;
    }
  }
  const Mat p = softmax_rows(params.logits);
  const Vec inner = (demand.array() * p.array()).rowwise().sum().matrix();
  const Mat grad = (p.array() * (demand.array().colwise() - inner.array())).matrix();
  return (grad.array().colwise() * mdp.reward.array()).matrix();
}

// Same gradient with the weights taken from the current exact diagonal values.
inline Mat gradient_exact(const TabularMdp& mdp, const DecompositionParams& params,
                          const AlphaScheme& scheme,
                          const std::vector<DeterministicPolicy>& policies) {
  const Mat rewards = decomposed_rewards(mdp, params);
  const auto cv = detail::cross_values(mdp, rewards, policies, false);
  return gradient_exact(mdp, params, policies, alpha_snapshot(scheme, cv.diag_table));
}

// Sampled objective gradient. For every start state and ordered part pair
// (i, j), rolls a fresh `cutoff`-step trajectory under policy j from the
// start and accumulates the discounted softmax-share gradients of part i's
// reward along the first `cutoff` visited states; the result is averaged over
// starts. Weights come from `alpha` at the start state and are constants.
inline Mat gradient_mc(const TabularMdp& mdp, const DecompositionParams& params,
                       const std::vector<DeterministicPolicy>& policies,
                       const AlphaSnapshot& alpha, const std::vector<int>& starts, int cutoff,
                       Rng& rng) {
  const int n = params.n_factors();
  if (static_cast<int>(policies.size()) != n)
    throw std::invalid_argument("gradient_mc: policy count mismatch");
  if (cutoff <= 0) throw std::invalid_argument("gradient_mc: cutoff must be positive");
  if (starts.empty()) throw std::invalid_argument("gradient_mc: need at least one start state");
  const Mat p = softmax_rows(params.logits);
  Mat grad = Mat::Zero(mdp.n_states, n);
  for (const int start : starts) {
    if (start < 0 || start >= mdp.n_states)
      throw std::invalid_argument("gradient_mc: start state out of range");
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double w = i == j ? alpha.diag(start, i) : -alpha.off_diag;
        int s = start;
        double disc = 1.0;
        for (int t = 0; t < cutoff; ++t) {
          // d(reward share i at s)/dF(s,k) = reward(s) * p_i * (1{k=i} - p_k)
          const double common = w * disc * mdp.reward[s] * p(s, i);
          grad.row(s) -= common * p.row(s);
          grad(s, i) += common;
          if (t + 1 < cutoff) {
            s = rng.categorical(mdp.transition[policies[j].at(s)].row(s));
            disc *= mdp.discount;
          }
        }
      }
    }
  }
  return grad / static_cast<double>(starts.size());
}

}  // namespace rdx
