#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rdx/mdp.hpp"

namespace rdx {

struct DeterministicPolicy {
  std::vector<int> action;  // one action per state

  int size() const { return static_cast<int>(action.size()); }
  int at(int s) const { return action[static_cast<std::size_t>(s)]; }

  Mat as_matrix(int n_actions) const {
    Mat m = Mat::Zero(size(), n_actions);
    for (int s = 0; s < size(); ++s) m(s, action[s]) = 1.0;
    return m;
  }

  bool operator==(const DeterministicPolicy&) const = default;
};

// argmax over a row with ties broken toward the lowest action index
inline int argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (int a = 1; a < row.size(); ++a)
    if (row[a] > row[best]) best = a;
  return best;
}

struct ValueIterationResult {
  Mat q;  // S x A
  DeterministicPolicy policy;
  int sweeps = 0;
};

// Solves Q(s,a) = reward(s) + gamma * sum_s' T(s,a,s') max_a' Q(s',a') by
// value iteration, stopping once gamma * ||Q_new - Q_old||_inf <= tol (which
// bounds the Bellman residual of Q_new by tol). Greedy ties go to the lowest
// action index. `warm_start` seeds the table, e.g. the previous solution when
// the reward has only moved slightly.
inline ValueIterationResult value_iteration(const TabularMdp& mdp, const Vec& reward,
                                            double gamma, double tol = 1e-10,
                                            const Mat* warm_start = nullptr) {
  mdp.validate();
  if (reward.size() != mdp.n_states)
    throw std::invalid_argument("value_iteration: reward length mismatch");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("value_iteration: gamma must lie in [0, 1)");
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");

  ValueIterationResult out;
  out.q = warm_start != nullptr ? *warm_start : Mat::Zero(mdp.n_states, mdp.n_actions);
  if (out.q.rows() != mdp.n_states || out.q.cols() != mdp.n_actions)
    throw std::invalid_argument("value_iteration: warm start shape mismatch");
  Mat next(mdp.n_states, mdp.n_actions);
  while (true) {
    const Vec v = out.q.rowwise().maxCoeff();
    for (int a = 0; a < mdp.n_actions; ++a)
      next.col(a) = reward + gamma * (mdp.transition[a] * v);
    const double delta = (next - out.q).cwiseAbs().maxCoeff();
    out.q.swap(next);
    ++out.sweeps;
    if (gamma * delta <= tol || delta == 0.0) break;
  }
  out.policy.action.resize(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) out.policy.action[s] = argmax_lowest(out.q.row(s));
  return out;
}

inline Mat transition_under(const TabularMdp& mdp, const DeterministicPolicy& policy) {
  if (policy.size() != mdp.n_states)
    throw std::invalid_argument("transition_under: policy length mismatch");
  Mat p(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    const int a = policy.at(s);
    if (a < 0 || a >= mdp.n_actions)
      throw std::invalid_argument("transition_under: action out of range");
    p.row(s) = mdp.transition[a].row(s);
  }
  return p;
}

inline Mat transition_under(const TabularMdp& mdp, const Mat& policy) {
  if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions)
    throw std::invalid_argument("transition_under: policy shape mismatch");
  Mat p = Mat::Zero(mdp.n_states, mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a)
    p += policy.col(a).asDiagonal() * mdp.transition[a];
  return p;
}

// Cached LU factorization of (I - gamma * P_pi); shared by policy evaluation,
// occupancy, and everything downstream that needs many solves per policy.
class PolicySolver {
 public:
  PolicySolver(const Mat& p_pi, double gamma)
      : gamma_(gamma),
        lu_(Mat::Identity(p_pi.rows(), p_pi.cols()) - gamma * p_pi) {
    if (!(gamma >= 0.0 && gamma < 1.0))
      throw std::invalid_argument("PolicySolver: gamma must lie in [0, 1)");
  }

  // U with U(s) = reward(s) + gamma * E_pi[U(s')]
  Vec evaluate(const Vec& reward) const { return lu_.solve(reward); }

  // one column per reward column
  Mat evaluate_all(const Mat& rewards) const { return lu_.solve(rewards); }

  // discounted visit counts Psi = (I - gamma P)^(-1); row s sums to 1/(1-gamma)
  Mat occupancy_psi() const { return lu_.inverse(); }

  double gamma() const { return gamma_; }

 private:
  double gamma_;
  Eigen::PartialPivLU<Mat> lu_;
};

namespace detail {
inline Vec solve_evaluation(const TabularMdp& mdp, const Vec& reward, const Mat& p_pi,
                            double gamma) {
  if (reward.size() != mdp.n_states)
    throw std::invalid_argument("policy_evaluation: reward length mismatch");
  const Mat a = Mat::Identity(mdp.n_states, mdp.n_states) - gamma * p_pi;
  const Vec u = Eigen::PartialPivLU<Mat>(a).solve(reward);
  const double residual = (a * u - reward).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-10 * std::max(1.0, reward.cwiseAbs().maxCoeff())))
    throw std::runtime_error("policy_evaluation: linear solve residual too large");
  return u;
}
}  // namespace detail

// Exact U^pi with U(s) = reward(s) + gamma * E_pi[U(s')].
inline Vec policy_evaluation(const TabularMdp& mdp, const Vec& reward,
                             const DeterministicPolicy& policy, double gamma) {
  return detail::solve_evaluation(mdp, reward, transition_under(mdp, policy), gamma);
}

inline Vec policy_evaluation(const TabularMdp& mdp, const Vec& reward, const Mat& policy,
                             double gamma) {
  return detail::solve_evaluation(mdp, reward, transition_under(mdp, policy), gamma);
}

struct OccupancyTable {
  Mat psi;         // (I - gamma P_pi)^(-1); psi(s, s') = discounted visits of s' from s
  Mat normalized;  // (1 - gamma) * psi; each row is a distribution
  double gamma = 0.0;
};

namespace detail {
inline OccupancyTable occupancy_from(const Mat& p_pi, double gamma) {
  OccupancyTable out;
  out.gamma = gamma;
  out.psi = PolicySolver(p_pi, gamma).occupancy_psi();
  out.normalized = (1.0 - gamma) * out.psi;
  const int n = static_cast<int>(out.psi.rows());
  for (int s = 0; s < n; ++s) {
    if (std::abs(out.psi.row(s).sum() - 1.0 / (1.0 - gamma)) > 1e-9 / (1.0 - gamma))
      throw std::runtime_error("occupancy: row mass differs from 1/(1-gamma)");
  }
  if ((out.psi.array() < -1e-12).any())
    throw std::runtime_error("occupancy: negative visit count");
  return out;
}
}  // namespace detail

inline OccupancyTable occupancy(const TabularMdp& mdp, const DeterministicPolicy& policy,
                                double gamma) {
  return detail::occupancy_from(transition_under(mdp, policy), gamma);
}

inline OccupancyTable occupancy(const TabularMdp& mdp, const Mat& policy, double gamma) {
  return detail::occupancy_from(transition_under(mdp, policy), gamma);
}

// Stationary distribution of a row-stochastic matrix by power iteration on
// the lazy chain (P + I)/2, which has the same fixed point and always mixes.
inline Vec stationary_distribution(const Mat& p, double tol = 1e-13, int max_iters = 200000) {
  const auto n = p.rows();
  if (n == 0 || p.cols() != n)
    throw std::invalid_argument("stationary_distribution: matrix must be square and non-empty");
  Vec v = Vec::Constant(n, 1.0 / static_cast<double>(n));
  for (int it = 0; it < max_iters; ++it) {
    Vec next = 0.5 * (p.transpose() * v) + 0.5 * v;
    next /= next.sum();
    const double delta = (next - v).cwiseAbs().sum();
    v.swap(next);
    if (delta <= tol) return v;
  }
  throw std::runtime_error("stationary_distribution: power iteration did not converge");
}

}  // namespace rdx
