#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdx/decomp.hpp"
#include "rdx/induced.hpp"
#include "rdx/mdp.hpp"
#include "rdx/trainer.hpp"

namespace rdx {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}
}  // namespace detail

// Minimal INI reader: [section] headers, key = value lines, # or ; comments.
// Every key remembers its line so errors can point at the file, and keys the
// loader never asks about are reported as unknown.
class IniFile {
 public:
  static IniFile parse_string(const std::string& text, const std::string& origin) {
    IniFile ini;
    ini.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string stripped = detail::trim(line);
      if (stripped.empty() || stripped[0] == '#' || stripped[0] == ';') continue;
      if (stripped.front() == '[') {
        if (stripped.back() != ']')
          throw ConfigError(ini.at_line(line_no) + "unterminated section header");
        section = detail::trim(stripped.substr(1, stripped.size() - 2));
        if (section.empty()) throw ConfigError(ini.at_line(line_no) + "empty section name");
        continue;
      }
      const std::size_t eq = stripped.find('=');
      if (eq == std::string::npos)
        throw ConfigError(ini.at_line(line_no) + "expected 'key = value'");
      const std::string key = detail::trim(stripped.substr(0, eq));
      if (key.empty()) throw ConfigError(ini.at_line(line_no) + "empty key");
      if (section.empty())
        throw ConfigError(ini.at_line(line_no) + "key '" + key + "' outside any [section]");
      const std::string full = section + "." + key;
      if (ini.entries_.count(full))
        throw ConfigError(ini.at_line(line_no) + "duplicate key '" + full + "'");
      ini.entries_[full] = {detail::trim(stripped.substr(eq + 1)), line_no};
    }
    return ini;
  }

  static IniFile parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
  }

  bool has(const std::string& full_key) const { return entries_.count(full_key) > 0; }

  std::string get_string(const std::string& full_key) const {
    const auto it = entries_.find(full_key);
    if (it == entries_.end())
      throw ConfigError(origin_ + ": missing required key '" + full_key + "'");
    consumed_.insert(full_key);
    return it->second.value;
  }

  std::string get_string(const std::string& full_key, const std::string& fallback) const {
    return has(full_key) ? get_string(full_key) : fallback;
  }

  double get_double(const std::string& full_key) const { return parse_double(full_key, get_string(full_key)); }
  double get_double(const std::string& full_key, double fallback) const {
    return has(full_key) ? get_double(full_key) : fallback;
  }

  long long get_int(const std::string& full_key) const { return parse_int(full_key, get_string(full_key)); }
  long long get_int(const std::string& full_key, long long fallback) const {
    return has(full_key) ? get_int(full_key) : fallback;
  }

  bool get_bool(const std::string& full_key) const {
    const std::string v = get_string(full_key);
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError(where(full_key) + "expected a boolean, got '" + v + "'");
  }
  bool get_bool(const std::string& full_key, bool fallback) const {
    return has(full_key) ? get_bool(full_key) : fallback;
  }

  std::vector<std::uint64_t> get_seed_list(const std::string& full_key) const {
    const std::string v = get_string(full_key);
    std::vector<std::uint64_t> out;
    std::istringstream in(v);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      tok = detail::trim(tok);
      if (tok.empty()) continue;
      const long long x = parse_int(full_key, tok);
      if (x < 0) throw ConfigError(where(full_key) + "seeds must be non-negative");
      out.push_back(static_cast<std::uint64_t>(x));
    }
    if (out.empty()) throw ConfigError(where(full_key) + "expected at least one seed");
    return out;
  }

  // location prefix like "path:12: " for the key, for error messages
  std::string where(const std::string& full_key) const {
    const auto it = entries_.find(full_key);
    if (it == entries_.end()) return origin_ + ": " + full_key + ": ";
    return at_line(it->second.line) + full_key + ": ";
  }

  // every key must have been read by the loader; typos become hard errors
  void reject_unknown_keys() const {
    for (const auto& [key, entry] : entries_)
      if (!consumed_.count(key))
        throw ConfigError(at_line(entry.line) + "unknown key '" + key + "'");
  }

  const std::string& origin() const { return origin_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };

  std::string at_line(int line) const { return origin_ + ":" + std::to_string(line) + ": "; }

  double parse_double(const std::string& full_key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError(where(full_key) + "expected a number, got '" + v + "'");
    }
  }

  long long parse_int(const std::string& full_key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const long long x = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ConfigError(where(full_key) + "expected an integer, got '" + v + "'");
    }
  }

  std::string origin_;
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> consumed_;
};

struct ExperimentConfig {
  GridworldSpec grid;
  TrainerConfig trainer;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;

  bool metrics_theorem1 = true;
  bool metrics_saturation = true;
  bool metrics_state_dependence = true;
  bool metrics_lemma1 = true;

  bool induced_enabled = false;
  std::string induced_region = "left_half";
  ControlConfig control;
  std::vector<std::uint64_t> induced_seeds;

  static ExperimentConfig load(const std::string& path) {
    return from_ini(IniFile::parse_file(path));
  }

  static ExperimentConfig from_ini(const IniFile& ini) {
    ExperimentConfig cfg;

    cfg.grid.width = static_cast<int>(ini.get_int("gridworld.width", 5));
    cfg.grid.height = static_cast<int>(ini.get_int("gridworld.height", 5));
    cfg.grid.teleport_on_reward = ini.get_bool("gridworld.teleport_on_reward", true);
    if (ini.has("gridworld.reward_cells")) {
      cfg.grid.reward_cells =
          parse_reward_cells(ini.get_string("gridworld.reward_cells"),
                             ini.where("gridworld.reward_cells"));
    } else {
      const double corner = ini.get_double("gridworld.corner_reward", 1.0);
      cfg.grid = GridworldSpec::four_corners(cfg.grid.width, cfg.grid.height, corner);
      cfg.grid.teleport_on_reward = ini.get_bool("gridworld.teleport_on_reward", true);
    }
    try {
      cfg.grid.validate();
    } catch (const std::exception& e) {
      throw ConfigError(ini.origin() + ": [gridworld] " + e.what());
    }

    TrainerConfig& t = cfg.trainer;
    t.n_factors = static_cast<int>(ini.get_int("decomposition.n_factors", 4));
    t.init_scale = ini.get_double("decomposition.init_scale", 1.0);
    const std::string alpha = ini.get_string("decomposition.alpha", "softened_min");
    if (alpha == "uniform") {
      t.alpha = AlphaScheme::uniform(ini.get_double("decomposition.alpha_c", 1.0));
    } else if (alpha == "softened_min") {
      t.alpha = AlphaScheme::softened_min(ini.get_double("decomposition.alpha_scale", 10.0),
                                          ini.get_double("decomposition.alpha_temperature", 2.0));
    } else {
      throw ConfigError(ini.where("decomposition.alpha") +
                        "expected 'uniform' or 'softened_min', got '" + alpha + "'");
    }

    const std::string mode = ini.get_string("trainer.mode", "exact");
    if (mode == "exact") {
      t.mode = TrainMode::kExact;
    } else if (mode == "sampled") {
      t.mode = TrainMode::kSampled;
    } else {
      throw ConfigError(ini.where("trainer.mode") + "expected 'exact' or 'sampled', got '" +
                        mode + "'");
    }
    const std::string opt = ini.get_string("trainer.optimizer", "adam");
    if (opt == "adam") {
      t.optimizer = Optimizer::kAdam;
    } else if (opt == "sgd") {
      t.optimizer = Optimizer::kSgd;
    } else {
      throw ConfigError(ini.where("trainer.optimizer") + "expected 'adam' or 'sgd', got '" +
                        opt + "'");
    }
    t.gamma = ini.get_double("trainer.gamma", 0.99);
    t.learning_rate = ini.get_double("trainer.learning_rate", t.mode == TrainMode::kExact ? 0.15 : 0.05);
    t.line_search = ini.get_bool("trainer.line_search", false);
    t.budget = ini.get_int("trainer.budget", t.mode == TrainMode::kExact ? 400 : 200000);
    t.log_interval = static_cast<int>(
        ini.get_int("trainer.log_interval", t.mode == TrainMode::kExact ? 50 : 10000));
    t.vi_tol = ini.get_double("trainer.vi_tol", 1e-10);
    t.rollout_cutoff = static_cast<int>(ini.get_int("trainer.rollout_cutoff", 10));
    t.reward_update_period = static_cast<int>(ini.get_int("trainer.reward_update_period", 20));
    t.policy_update_period = static_cast<int>(ini.get_int("trainer.policy_update_period", 4));
    t.replay_capacity = static_cast<int>(ini.get_int("trainer.replay_capacity", 10000));
    t.minibatch = static_cast<int>(ini.get_int("trainer.minibatch", 32));
    t.epsilon.start_eps = ini.get_double("trainer.epsilon_start", 1.0);
    t.epsilon.end_eps = ini.get_double("trainer.epsilon_end", 0.01);
    t.epsilon.horizon = ini.get_int("trainer.epsilon_horizon", 100000);
    t.resample_period = static_cast<int>(ini.get_int("trainer.resample_period", 50));
    t.q_learning_rate = ini.get_double("trainer.q_learning_rate", 0.1);
    t.q_learning_rate_end = ini.get_double("trainer.q_learning_rate_end", -1.0);

    cfg.seeds = ini.get_seed_list("trainer.seeds");
    t.n_runs = static_cast<int>(cfg.seeds.size());

    cfg.output_dir = ini.get_string("output.dir");
    if (cfg.output_dir.empty()) throw ConfigError(ini.where("output.dir") + "must not be empty");

    cfg.metrics_theorem1 = ini.get_bool("metrics.theorem1", true);
    cfg.metrics_saturation = ini.get_bool("metrics.saturation", true);
    cfg.metrics_state_dependence = ini.get_bool("metrics.state_dependence", true);
    cfg.metrics_lemma1 = ini.get_bool("metrics.lemma1", true);

    cfg.induced_enabled = ini.get_bool("induced.enabled", false);
    if (cfg.induced_enabled || ini.has("induced.region")) {
      cfg.induced_region = ini.get_string("induced.region", "left_half");
      try {
        named_grid_region(cfg.grid, cfg.induced_region);
      } catch (const std::exception& e) {
        throw ConfigError(ini.where("induced.region") + e.what());
      }
    }
    cfg.control.budget = ini.get_int("induced.budget", 4000);
    cfg.control.eval_interval = static_cast<int>(ini.get_int("induced.eval_interval", 100));
    cfg.control.learning_rate = ini.get_double("induced.learning_rate", 0.1);
    cfg.control.epsilon.start_eps = ini.get_double("induced.epsilon_start", 1.0);
    cfg.control.epsilon.end_eps = ini.get_double("induced.epsilon_end", 0.01);
    cfg.control.epsilon.horizon =
        ini.get_int("induced.epsilon_horizon", std::max<long long>(1, cfg.control.budget / 2));
    cfg.control.vi_tol = t.vi_tol;
    cfg.induced_seeds = ini.has("induced.seeds") ? ini.get_seed_list("induced.seeds") : cfg.seeds;

    ini.reject_unknown_keys();
    try {
      t.validate();
      cfg.control.validate();
    } catch (const std::exception& e) {
      throw ConfigError(ini.origin() + ": " + e.what());
    }
    return cfg;
  }

 private:
  // "x,y:value" entries separated by spaces or semicolons
  static std::vector<std::pair<GridCell, double>> parse_reward_cells(const std::string& text,
                                                                     const std::string& where) {
    std::vector<std::pair<GridCell, double>> cells;
    std::string entry;
    std::string normalized = text;
    for (char& ch : normalized)
      if (ch == ';') ch = ' ';
    std::istringstream stream(normalized);
    while (stream >> entry) {
      const std::size_t comma = entry.find(',');
      const std::size_t colon = entry.find(':');
      if (comma == std::string::npos || colon == std::string::npos || colon < comma)
        throw ConfigError(where + "expected entries like 'x,y:value', got '" + entry + "'");
      try {
        GridCell cell{std::stoi(entry.substr(0, comma)),
                      std::stoi(entry.substr(comma + 1, colon - comma - 1))};
        cells.emplace_back(cell, std::stod(entry.substr(colon + 1)));
      } catch (const std::exception&) {
        throw ConfigError(where + "malformed reward cell '" + entry + "'");
      }
    }
    if (cells.empty()) throw ConfigError(where + "expected at least one reward cell");
    return cells;
  }
};

}  // namespace rdx
