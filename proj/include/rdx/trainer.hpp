#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rdx/decomp.hpp"
#include "rdx/mdp.hpp"
#include "rdx/metrics.hpp"
#include "rdx/planner.hpp"
#include "rdx/qlearn.hpp"
#include "rdx/rng.hpp"

namespace rdx {

enum class TrainMode { kExact, kSampled };
enum class Optimizer { kAdam, kSgd };

struct TrainerConfig {
  TrainMode mode = TrainMode::kExact;
  int n_factors = 4;
  double gamma = 0.99;
  AlphaScheme alpha = AlphaScheme::softened_min();

  Optimizer optimizer = Optimizer::kAdam;
  double learning_rate = 0.15;  // logit step size
  bool line_search = false;     // SGD only: backtrack until the frozen objective does not drop
  double init_scale = 1.0;      // std of the initial logits
  long long budget = 400;       // exact: logit updates; sampled: environment steps
  int log_interval = 50;        // same unit as budget
  double vi_tol = 1e-10;
  int n_runs = 4;

  // sampled mode
  int rollout_cutoff = 10;         // gradient trajectory length
  int reward_update_period = 20;   // environment steps between logit updates
  int policy_update_period = 4;    // environment steps between Q updates
  int replay_capacity = 10000;
  int minibatch = 32;
  EpsilonSchedule epsilon{1.0, 0.01, 100000};
  int resample_period = 50;        // steps between switching the acting part
  double q_learning_rate = 0.1;
  double q_learning_rate_end = -1.0;  // end of a linear anneal; negative = constant

  void validate() const {
    if (n_factors < 1) throw std::invalid_argument("TrainerConfig: n_factors must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0))
      throw std::invalid_argument("TrainerConfig: gamma must lie in [0, 1)");
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("TrainerConfig: learning_rate must be positive");
    if (budget < 1) throw std::invalid_argument("TrainerConfig: budget must be positive");
    if (log_interval < 1) throw std::invalid_argument("TrainerConfig: log_interval must be positive");
    if (!(vi_tol > 0.0)) throw std::invalid_argument("TrainerConfig: vi_tol must be positive");
    if (n_runs < 1) throw std::invalid_argument("TrainerConfig: n_runs must be positive");
    if (init_scale < 0.0) throw std::invalid_argument("TrainerConfig: init_scale must be non-negative");
    if (line_search && optimizer != Optimizer::kSgd)
      throw std::invalid_argument("TrainerConfig: line_search requires the sgd optimizer");
    if (mode == TrainMode::kSampled) {
      if (rollout_cutoff < 1)
        throw std::invalid_argument("TrainerConfig: rollout_cutoff must be positive");
      if (reward_update_period < 1 || policy_update_period < 1 || resample_period < 1)
        throw std::invalid_argument("TrainerConfig: update periods must be positive");
      if (replay_capacity < 1 || minibatch < 1)
        throw std::invalid_argument("TrainerConfig: replay capacity and minibatch must be positive");
      if (budget <= minibatch)
        throw std::invalid_argument(
            "TrainerConfig: budget must exceed the warmup (one minibatch of transitions)");
      if (!(q_learning_rate > 0.0))
        throw std::invalid_argument("TrainerConfig: q_learning_rate must be positive");
      epsilon.validate();
    }
  }
};

struct LogEntry {
  long long step = 0;
  ObjectiveReport report;
  double avg_saturation = 0.0;
  std::vector<bool> trivial;
};

struct TrainResult {
  DecompositionParams params;
  PolicySet policy_set;
  std::vector<LogEntry> history;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::kExact;
  ObjectiveReport final_report;  // exact, at per-part optimal policies
  std::vector<bool> trivial_flags;
  double final_j_disentangled = 0.0;
};

namespace detail {

// Adam with bias correction; SGD is the degenerate case.
class AscentOptimizer {
 public:
  AscentOptimizer(Optimizer kind, double lr, Eigen::Index rows, Eigen::Index cols)
      : kind_(kind), lr_(lr), m_(Mat::Zero(rows, cols)), v_(Mat::Zero(rows, cols)) {}

  Mat direction(const Mat& grad) {
    if (kind_ == Optimizer::kSgd) return lr_ * grad;
    ++t_;
    m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
    v_ = (kBeta2 * v_.array() + (1.0 - kBeta2) * grad.array().square()).matrix();
    const double bias1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bias2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    return (lr_ * (m_ / bias1).array() / ((v_ / bias2).array().sqrt() + kEps)).matrix();
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  Optimizer kind_;
  double lr_;
  long long t_ = 0;
  Mat m_, v_;
};

// Applies one ascent update. With line search on, the step is halved until
// the objective frozen at the current policies and weights stops decreasing
// (up to 40 halvings, then no step), so that frozen objective never drops.
inline void apply_update(const TabularMdp& mdp, DecompositionParams& params, const Mat& grad,
                         AscentOptimizer& opt, bool line_search,
                         const std::vector<DeterministicPolicy>& policies,
                         const AlphaSnapshot& alpha, double frozen_before) {
  const Mat step = opt.direction(grad);
  if (!line_search) {
    params.logits += step;
    ++params.version;
    return;
  }
  double scale = 1.0;
  for (int attempt = 0; attempt < 40; ++attempt) {
    DecompositionParams trial = params;
    trial.logits += scale * step;
    if (evaluate_objective_frozen(mdp, trial, policies, alpha).j_disentangled >= frozen_before) {
      params.logits = trial.logits;
      ++params.version;
      return;
    }
    scale *= 0.5;
  }
  // no improving step found; keep the current point
}

inline std::vector<bool> trivial_flags_of(const TabularMdp& mdp, const ObjectiveReport& report) {
  // a part is trivial when its own-policy value is negligible against the
  // best case reward mass 1/(1-gamma) * r_max
  const double r_max = mdp.reward.cwiseAbs().maxCoeff();
  const double floor = 1e-3 * r_max / (1.0 - mdp.discount);
  const int n = static_cast<int>(report.value_matrix.rows());
  std::vector<bool> flags(n);
  for (int i = 0; i < n; ++i) flags[i] = report.value_matrix(i, i) < floor;
  return flags;
}

inline LogEntry make_log_entry(const TabularMdp& mdp, const DecompositionParams& params,
                               long long step, const ObjectiveReport& report) {
  LogEntry entry;
  entry.step = step;
  entry.report = report;
  entry.avg_saturation = average_saturation(mdp, params);
  entry.trivial = trivial_flags_of(mdp, report);
  return entry;
}

inline TrainResult train_exact(const TabularMdp& mdp, const TrainerConfig& cfg,
                               std::uint64_t seed) {
  Rng rng(seed);
  TrainResult result;
  result.seed = seed;
  result.mode = TrainMode::kExact;
  result.params = random_decomposition(mdp.n_states, cfg.n_factors, cfg.init_scale, rng);

  std::vector<Mat> warm;  // per-part Q tables, reused across updates
  AscentOptimizer opt(cfg.optimizer, cfg.learning_rate, mdp.n_states, cfg.n_factors);
  for (long long step = 0; step < cfg.budget; ++step) {
    const auto policies = optimal_factor_policies(mdp, result.params, cfg.vi_tol, &warm);
    const Mat rewards = decomposed_rewards(mdp, result.params);
    const auto cv = detail::cross_values(mdp, rewards, policies, false);
    const AlphaSnapshot alpha = alpha_snapshot(cfg.alpha, cv.diag_table);
    const ObjectiveReport report = detail::assemble_report(mdp, cv, alpha);
    if (step % cfg.log_interval == 0)
      result.history.push_back(make_log_entry(mdp, result.params, step, report));
    const Mat grad = gradient_exact(mdp, result.params, policies, alpha);
    apply_update(mdp, result.params, grad, opt, cfg.line_search, policies, alpha,
                 report.j_disentangled);
  }

  result.final_report = evaluate_objective(mdp, result.params, cfg.alpha, cfg.vi_tol);
  result.final_j_disentangled = result.final_report.j_disentangled;
  result.trivial_flags = trivial_flags_of(mdp, result.final_report);
  result.history.push_back(
      make_log_entry(mdp, result.params, cfg.budget, result.final_report));

  // keep the exact per-part Q tables as the run's policy set
  optimal_factor_policies(mdp, result.params, cfg.vi_tol, &warm);
  result.policy_set = PolicySet::zeros(cfg.n_factors, mdp.n_states, mdp.n_actions,
                                       cfg.q_learning_rate);
  result.policy_set.q = warm;
  return result;
}

inline TrainResult train_sampled(const TabularMdp& mdp, const TrainerConfig& cfg,
                                 std::uint64_t seed) {
  Rng rng(seed);
  TrainResult result;
  result.seed = seed;
  result.mode = TrainMode::kSampled;
  result.params = random_decomposition(mdp.n_states, cfg.n_factors, cfg.init_scale, rng);

  PolicySet set =
      PolicySet::zeros(cfg.n_factors, mdp.n_states, mdp.n_actions, cfg.q_learning_rate);
  ReplayBuffer buffer(cfg.replay_capacity);
  AscentOptimizer opt(cfg.optimizer, cfg.learning_rate, mdp.n_states, cfg.n_factors);

  int acting = rng.uniform_int(cfg.n_factors);
  int s = rng.categorical(mdp.start_distribution);
  for (long long t = 0; t < cfg.budget; ++t) {
    if (t % cfg.log_interval == 0)
      result.history.push_back(make_log_entry(
          mdp, result.params, t,
          evaluate_objective(mdp, result.params, cfg.alpha, cfg.vi_tol)));
    if (cfg.q_learning_rate_end >= 0.0) {
      const double frac = static_cast<double>(t) / static_cast<double>(cfg.budget);
      set.learning_rate =
          cfg.q_learning_rate + frac * (cfg.q_learning_rate_end - cfg.q_learning_rate);
    }
    const double eps = epsilon_at(cfg.epsilon, t);
    const int a = epsilon_greedy_action(set.q[acting], s, eps, rng);
    const int next = rng.categorical(mdp.transition[a].row(s));
    buffer.push({s, a, mdp.reward[next], next});
    s = next;
    if ((t + 1) % cfg.resample_period == 0) acting = rng.uniform_int(cfg.n_factors);
    if ((t + 1) % cfg.policy_update_period == 0 && buffer.size() >= cfg.minibatch) {
      for (int i = 0; i < cfg.n_factors; ++i) {
        const auto batch = buffer.sample_batch(cfg.minibatch, rng);
        q_minibatch_update(set, i, batch, result.params, mdp, cfg.gamma);
      }
    }
    if ((t + 1) % cfg.reward_update_period == 0 && buffer.size() >= cfg.minibatch) {
      const auto batch = buffer.sample_batch(cfg.minibatch, rng);
      std::vector<int> starts;
      starts.reserve(batch.size());
      for (const Transition& tr : batch) starts.push_back(tr.state);
      const AlphaSnapshot alpha = alpha_snapshot(cfg.alpha, set.value_table());
      const auto policies = set.greedy_policies();
      const Mat grad =
          gradient_mc(mdp, result.params, policies, alpha, starts, cfg.rollout_cutoff, rng);
      const Mat step = opt.direction(grad);
      result.params.logits += step;
      ++result.params.version;
    }
  }

  result.policy_set = std::move(set);
  result.final_report = evaluate_objective(mdp, result.params, cfg.alpha, cfg.vi_tol);
  result.final_j_disentangled = result.final_report.j_disentangled;
  result.trivial_flags = trivial_flags_of(mdp, result.final_report);
  result.history.push_back(
      make_log_entry(mdp, result.params, cfg.budget, result.final_report));
  return result;
}

}  // namespace detail

// One seeded training run. Exact mode re-plans every part's optimal policy
// each update and follows the exact objective gradient; sampled mode
// interleaves acting, replayed Q-learning on relabeled rewards, and sampled
// gradient updates. Either way the returned report and flags come from a
// final exact re-evaluation.
inline TrainResult train(const TabularMdp& mdp, const TrainerConfig& cfg, std::uint64_t seed) {
  mdp.validate();
  cfg.validate();
  return cfg.mode == TrainMode::kExact ? detail::train_exact(mdp, cfg, seed)
                                       : detail::train_sampled(mdp, cfg, seed);
}

// Best run by final objective; ties go to the lowest seed.
inline const TrainResult& select_best_run(const std::vector<TrainResult>& runs) {
  if (runs.empty()) throw std::invalid_argument("select_best_run: no runs");
  const TrainResult* best = &runs.front();
  for (const TrainResult& run : runs) {
    if (run.final_j_disentangled > best->final_j_disentangled ||
        (run.final_j_disentangled == best->final_j_disentangled && run.seed < best->seed))
      best = &run;
  }
  return *best;
}

}  // namespace rdx
