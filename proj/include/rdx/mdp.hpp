#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rdx/rng.hpp"

namespace rdx {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Finite MDP with a state-indexed reward: the payoff for being in state s is
// reward[s], and values count the reward of the state they start from,
// V(s) = reward(s) + discount * E[V(s')].
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Mat> transition;  // one S x S row-stochastic matrix per action
  Vec reward;                   // length S
  double discount = 0.99;
  Vec start_distribution;       // length S, sums to 1

  void validate() const {
    if (n_states <= 0 || n_actions <= 0)
      throw std::invalid_argument("TabularMdp: need at least one state and one action");
    if (static_cast<int>(transition.size()) != n_actions)
      throw std::invalid_argument("TabularMdp: one transition matrix per action required");
    if (reward.size() != n_states || start_distribution.size() != n_states)
      throw std::invalid_argument("TabularMdp: reward/start_distribution length mismatch");
    if (!(discount >= 0.0 && discount < 1.0))
      throw std::invalid_argument("TabularMdp: discount must lie in [0, 1)");
    if (!reward.allFinite())
      throw std::invalid_argument("TabularMdp: rewards must be finite");
    for (int a = 0; a < n_actions; ++a) {
      const Mat& t = transition[a];
      if (t.rows() != n_states || t.cols() != n_states)
        throw std::invalid_argument("TabularMdp: transition matrix shape mismatch");
      if (!t.allFinite() || (t.array() < 0.0).any())
        throw std::invalid_argument("TabularMdp: transition entries must be finite and non-negative");
      for (int s = 0; s < n_states; ++s) {
        if (std::abs(t.row(s).sum() - 1.0) > 1e-12)
          throw std::invalid_argument("TabularMdp: transition row (action " + std::to_string(a) +
                                      ", state " + std::to_string(s) + ") is not stochastic");
      }
    }
    if ((start_distribution.array() < 0.0).any() ||
        std::abs(start_distribution.sum() - 1.0) > 1e-12)
      throw std::invalid_argument("TabularMdp: start_distribution is not a distribution");
  }
};

// Grid actions, in tie-break order.
inline constexpr int kLeft = 0;
inline constexpr int kRight = 1;
inline constexpr int kUp = 2;
inline constexpr int kDown = 3;
inline constexpr int kGridActions = 4;
inline constexpr int kDx[kGridActions] = {-1, 1, 0, 0};
inline constexpr int kDy[kGridActions] = {0, 0, -1, 1};
inline constexpr char kActionGlyph[kGridActions] = {'<', '>', '^', 'v'};

struct GridCell {
  int x = 0;
  int y = 0;
};

struct GridworldSpec {
  int width = 5;
  int height = 5;
  std::vector<std::pair<GridCell, double>> reward_cells;  // empty = no rewards
  bool teleport_on_reward = true;

  int n_states() const { return width * height; }
  int cell_index(GridCell c) const { return c.y * width + c.x; }
  GridCell cell_of(int s) const { return {s % width, s / width}; }

  static GridworldSpec four_corners(int width = 5, int height = 5, double reward = 1.0) {
    GridworldSpec g;
    g.width = width;
    g.height = height;
    g.reward_cells = {{{0, 0}, reward},
                      {{width - 1, 0}, reward},
                      {{0, height - 1}, reward},
                      {{width - 1, height - 1}, reward}};
    return g;
  }

  void validate() const {
    if (width <= 0 || height <= 0)
      throw std::invalid_argument("GridworldSpec: width and height must be positive");
    for (const auto& [cell, value] : reward_cells) {
      if (cell.x < 0 || cell.x >= width || cell.y < 0 || cell.y >= height)
        throw std::invalid_argument("GridworldSpec: reward cell outside the grid");
      if (!std::isfinite(value))
        throw std::invalid_argument("GridworldSpec: reward value must be finite");
    }
  }
};

// Builds the gridworld MDP. Moves clamp at the boundary. A rewarding cell
// pays reward[s] while occupied; with teleport_on_reward, every action taken
// from a rewarding cell lands uniformly at random over the whole grid, so a
// rewarding cell is occupied exactly one step per visit. The start
// distribution is uniform over all cells.
inline TabularMdp build_gridworld(const GridworldSpec& spec, double discount = 0.99) {
  spec.validate();
  const int n = spec.n_states();
  TabularMdp mdp;
  mdp.n_states = n;
  mdp.n_actions = kGridActions;
  mdp.discount = discount;
  mdp.reward = Vec::Zero(n);
  for (const auto& [cell, value] : spec.reward_cells) mdp.reward[spec.cell_index(cell)] = value;
  mdp.start_distribution = Vec::Constant(n, 1.0 / n);
  mdp.transition.assign(kGridActions, Mat::Zero(n, n));
  for (int s = 0; s < n; ++s) {
    const GridCell c = spec.cell_of(s);
    const bool teleports = spec.teleport_on_reward && mdp.reward[s] != 0.0;
    for (int a = 0; a < kGridActions; ++a) {
      if (teleports) {
        mdp.transition[a].row(s).setConstant(1.0 / n);
      } else {
        const int nx = std::clamp(c.x + kDx[a], 0, spec.width - 1);
        const int ny = std::clamp(c.y + kDy[a], 0, spec.height - 1);
        mdp.transition[a](s, spec.cell_index({nx, ny})) = 1.0;
      }
    }
  }
  mdp.validate();
  return mdp;
}

struct Step {
  int state = 0;
  int action = 0;
  double reward = 0.0;  // reward of next_state (the payoff the move uncovers)
  int next_state = 0;
};

struct Trajectory {
  int start = 0;
  std::vector<Step> steps;
};

// Rolls `cutoff` steps from `start` under a stochastic policy (rows of
// `policy` are action distributions).
inline Trajectory simulate_trajectory(const TabularMdp& mdp, const Mat& policy, int start,
                                      int cutoff, Rng& rng) {
  if (policy.rows() != mdp.n_states || policy.cols() != mdp.n_actions)
    throw std::invalid_argument("simulate_trajectory: policy shape mismatch");
  if (start < 0 || start >= mdp.n_states)
    throw std::invalid_argument("simulate_trajectory: start state out of range");
  if (cutoff < 1) throw std::invalid_argument("simulate_trajectory: cutoff must be at least 1");
  Trajectory traj;
  traj.start = start;
  traj.steps.reserve(cutoff);
  int s = start;
  for (int t = 0; t < cutoff; ++t) {
    const int a = rng.categorical(policy.row(s));
    const int next = rng.categorical(mdp.transition[a].row(s));
    traj.steps.push_back({s, a, mdp.reward[next], next});
    s = next;
  }
  return traj;
}

// Copy of the MDP with rewards zeroed outside the region (dynamics unchanged).
inline TabularMdp restrict_rewards(const TabularMdp& mdp,
                                   const std::function<bool(int)>& region) {
  TabularMdp out = mdp;
  for (int s = 0; s < mdp.n_states; ++s)
    if (!region(s)) out.reward[s] = 0.0;
  return out;
}

inline Mat uniform_policy(const TabularMdp& mdp) {
  return Mat::Constant(mdp.n_states, mdp.n_actions, 1.0 / mdp.n_actions);
}

// Named grid regions for reward restriction. Halves split on the midline;
// the middle column/row of an odd-sized grid goes to the left/top half.
inline std::function<bool(int)> named_grid_region(const GridworldSpec& spec,
                                                  const std::string& name) {
  const int w = spec.width;
  const int h = spec.height;
  if (name == "all") return [](int) { return true; };
  if (name == "none") return [](int) { return false; };
  if (name == "left_half") return [w](int s) { return s % w < (w + 1) / 2; };
  if (name == "right_half") return [w](int s) { return s % w >= w / 2; };
  if (name == "top_half") return [w, h](int s) { return s / w < (h + 1) / 2; };
  if (name == "bottom_half") return [w, h](int s) { return s / w >= h / 2; };
  throw std::invalid_argument("named_grid_region: unknown region '" + name + "'");
}

}  // namespace rdx
