#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rdx/decomp.hpp"
#include "rdx/mdp.hpp"
#include "rdx/planner.hpp"
#include "rdx/rng.hpp"

namespace rdx {

// One Q table per reward part, learned from relabeled transitions. The
// sampled target is reward(s') + gamma * max_a Q(s', a) (the payoff a move
// uncovers plus the discounted continuation), whose greedy policy matches the
// exact planner's.
struct PolicySet {
  std::vector<Mat> q;  // per part: S x A
  double learning_rate = 0.1;
  std::vector<std::uint64_t> version;  // update counter per part

  static PolicySet zeros(int n_factors, int n_states, int n_actions, double learning_rate) {
    if (n_factors <= 0 || n_states <= 0 || n_actions <= 0)
      throw std::invalid_argument("PolicySet: sizes must be positive");
    PolicySet set;
    set.q.assign(n_factors, Mat::Zero(n_states, n_actions));
    set.version.assign(n_factors, 0);
    set.learning_rate = learning_rate;
    return set;
  }

  int n_factors() const { return static_cast<int>(q.size()); }

  int greedy(int factor, int s) const { return argmax_lowest(q[factor].row(s)); }

  DeterministicPolicy greedy_policy(int factor) const {
    DeterministicPolicy p;
    p.action.resize(q[factor].rows());
    for (int s = 0; s < static_cast<int>(q[factor].rows()); ++s) p.action[s] = greedy(factor, s);
    return p;
  }

  std::vector<DeterministicPolicy> greedy_policies() const {
    std::vector<DeterministicPolicy> out;
    out.reserve(q.size());
    for (int i = 0; i < n_factors(); ++i) out.push_back(greedy_policy(i));
    return out;
  }

  // S x n table of max_a Q_i(s, a); the sampled stand-in for exact own-values
  Mat value_table() const {
    Mat t(q.front().rows(), n_factors());
    for (int i = 0; i < n_factors(); ++i) t.col(i) = q[i].rowwise().maxCoeff();
    return t;
  }
};

struct Transition {
  int state = 0;
  int action = 0;
  double reward = 0.0;  // environment reward of next_state
  int next_state = 0;
};

// Fixed-capacity ring buffer with uniform with-replacement sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {
    if (capacity <= 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    data_.reserve(capacity);
  }

  void push(const Transition& t) {
    if (size() < capacity_) {
      data_.push_back(t);
    } else {
      data_[head_] = t;
      head_ = (head_ + 1) % capacity_;
    }
  }

  int size() const { return static_cast<int>(data_.size()); }
  int capacity() const { return capacity_; }
  const Transition& operator[](int i) const { return data_[i]; }

  std::vector<Transition> sample_batch(int n, Rng& rng) const {
    if (size() == 0) throw std::logic_error("ReplayBuffer: cannot sample from an empty buffer");
    std::vector<Transition> batch;
    batch.reserve(n);
    for (int k = 0; k < n; ++k) batch.push_back(data_[rng.uniform_int(size())]);
    return batch;
  }

 private:
  std::vector<Transition> data_;
  int capacity_;
  int head_ = 0;
};

struct EpsilonSchedule {
  double start_eps = 1.0;
  double end_eps = 0.01;
  long long horizon = 100000;  // steps to anneal over; flat afterwards

  void validate() const {
    if (horizon <= 0) throw std::invalid_argument("EpsilonSchedule: horizon must be positive");
    if (start_eps < 0 || start_eps > 1 || end_eps < 0 || end_eps > 1)
      throw std::invalid_argument("EpsilonSchedule: epsilon must lie in [0, 1]");
    if (end_eps > start_eps)
      throw std::invalid_argument("EpsilonSchedule: schedule must anneal downward");
  }
};

// linear interpolation from start to end over `horizon` steps, flat after
inline double epsilon_at(const EpsilonSchedule& sched, long long t) {
  sched.validate();
  if (t < 0) throw std::invalid_argument("epsilon_at: negative step");
  if (t >= sched.horizon) return sched.end_eps;
  const double frac = static_cast<double>(t) / static_cast<double>(sched.horizon);
  return sched.start_eps + frac * (sched.end_eps - sched.start_eps);
}

inline int greedy_action(const Mat& q, int s) { return argmax_lowest(q.row(s)); }

// With probability eps a uniform action, otherwise greedy (ties to the lowest
// index). Always consumes exactly one uniform draw plus one more when
// exploring, so seeded runs replay exactly.
inline int epsilon_greedy_action(const Mat& q, int s, double eps, Rng& rng) {
  if (s < 0 || s >= q.rows()) throw std::invalid_argument("epsilon_greedy_action: state out of range");
  if (rng.uniform() < eps) return rng.uniform_int(static_cast<int>(q.cols()));
  return greedy_action(q, s);
}

// One Q-learning step per batch transition for the given part, with the
// stored environment reward relabeled on the fly to the part's share at the
// transition's next state.
inline void q_minibatch_update(PolicySet& set, int factor, std::span<const Transition> batch,
                               const DecompositionParams& params, const TabularMdp& mdp,
                               double gamma) {
  if (factor < 0 || factor >= set.n_factors())
    throw std::invalid_argument("q_minibatch_update: factor out of range");
  Mat& q = set.q[factor];
  const double lr = set.learning_rate;
  const Vec part = decomposed_rewards(mdp, params).col(factor);
  for (const Transition& t : batch) {
    const double target = part[t.next_state] + gamma * q.row(t.next_state).maxCoeff();
    q(t.state, t.action) += lr * (target - q(t.state, t.action));
  }
  ++set.version[factor];
}

}  // namespace rdx
