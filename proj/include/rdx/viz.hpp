#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdx/decomp.hpp"
#include "rdx/mdp.hpp"
#include "rdx/planner.hpp"

namespace rdx {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void write_pgm(const std::filesystem::path& path, int width, int height,
                      const std::vector<int>& gray) {
  auto out = open_out(path);
  out << "P2\n" << width << " " << height << "\n255\n";
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (x > 0) out << ' ';
      out << gray[static_cast<std::size_t>(y) * width + x];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed on '" + path.string() + "'");
}

}  // namespace detail

// Per-part reward-share maps. Text grids show a rewarding cell's share as a
// digit 0..9 (tenths, rounded) and '.' elsewhere; PGM images scale the share
// to 0..255. partition.* colors each rewarding cell by its owning part
// (letters A.., or evenly spaced gray levels).
inline void emit_heatmaps(const DecompositionParams& params, const TabularMdp& mdp,
                          const GridworldSpec& spec, const std::filesystem::path& out_dir) {
  if (params.n_states() != mdp.n_states || spec.n_states() != mdp.n_states)
    throw std::invalid_argument("emit_heatmaps: geometry mismatch");
  std::filesystem::create_directories(out_dir);
  const Mat shares = softmax_rows(params.logits);
  const int n = params.n_factors();
  for (int i = 0; i < n; ++i) {
    auto text = detail::open_out(out_dir / ("factor_" + std::to_string(i) + ".txt"));
    std::vector<int> gray(static_cast<std::size_t>(spec.n_states()), 0);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const int s = spec.cell_index({x, y});
        if (mdp.reward[s] == 0.0) {
          text << '.';
        } else {
          const double share = shares(s, i);
          text << std::min(9, static_cast<int>(std::lround(share * 9.0)));
          gray[s] = std::clamp(static_cast<int>(std::lround(share * 255.0)), 0, 255);
        }
      }
      text << '\n';
    }
    detail::write_pgm(out_dir / ("factor_" + std::to_string(i) + ".pgm"), spec.width, spec.height,
                      gray);
  }

  auto text = detail::open_out(out_dir / "partition.txt");
  std::vector<int> gray(static_cast<std::size_t>(spec.n_states()), 0);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const int s = spec.cell_index({x, y});
      if (mdp.reward[s] == 0.0) {
        text << '.';
        continue;
      }
      int owner = 0;
      shares.row(s).maxCoeff(&owner);
      text << static_cast<char>('A' + owner);
      gray[s] = (owner + 1) * 255 / n;
    }
    text << '\n';
  }
  detail::write_pgm(out_dir / "partition.pgm", spec.width, spec.height, gray);
}

// One arrow grid per policy: <, >, ^, v by the chosen action.
inline void emit_policy_maps(const std::vector<DeterministicPolicy>& policies,
                             const GridworldSpec& spec, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < policies.size(); ++i) {
    if (policies[i].size() != spec.n_states())
      throw std::invalid_argument("emit_policy_maps: policy length mismatch");
    auto text = detail::open_out(out_dir / ("policy_" + std::to_string(i) + ".txt"));
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const int a = policies[i].at(spec.cell_index({x, y}));
        if (a < 0 || a >= kGridActions)
          throw std::invalid_argument("emit_policy_maps: action out of range");
        text << kActionGlyph[a];
      }
      text << '\n';
    }
  }
}

// Follows a policy's arrows (clamped moves, no teleport) from `from` for at
// most |S| hops; true when `target` is reached. The share of cells that reach
// their part's own cell this way is the cheap sanity check on a trained run.
inline bool arrows_reach(const DeterministicPolicy& policy, const GridworldSpec& spec, int from,
                         int target) {
  int s = from;
  for (int hop = 0; hop <= spec.n_states(); ++hop) {
    if (s == target) return true;
    const GridCell c = spec.cell_of(s);
    const int a = policy.at(s);
    const int nx = std::clamp(c.x + kDx[a], 0, spec.width - 1);
    const int ny = std::clamp(c.y + kDy[a], 0, spec.height - 1);
    const int next = spec.cell_index({nx, ny});
    if (next == s) return false;  // parked against a wall somewhere else
    s = next;
  }
  return false;
}

}  // namespace rdx
