#pragma once

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rdx/decomp.hpp"
#include "rdx/trainer.hpp"

namespace rdx {

using Json = nlohmann::json;

inline Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw std::runtime_error("expected a non-empty matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.at(0).size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols)
      throw std::runtime_error("ragged matrix rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline Json report_to_json(const ObjectiveReport& rep) {
  Json j;
  j["j_independent"] = rep.j_independent;
  j["j_nontrivial"] = rep.j_nontrivial;
  j["j_disentangled"] = rep.j_disentangled;
  j["value_matrix"] = mat_to_json(rep.value_matrix);
  j["alpha_diag"] = mat_to_json(rep.alpha.diag);
  j["alpha_off_diag"] = rep.alpha.off_diag;
  return j;
}

inline Json result_to_json(const TrainResult& result) {
  Json j;
  j["mode"] = result.mode == TrainMode::kExact ? "exact" : "sampled";
  j["seed"] = result.seed;
  j["logits"] = mat_to_json(result.params.logits);
  j["param_version"] = result.params.version;
  Json q = Json::array();
  for (const Mat& table : result.policy_set.q) q.push_back(mat_to_json(table));
  j["q_tables"] = std::move(q);
  j["final"] = report_to_json(result.final_report);
  j["final_j_disentangled"] = result.final_j_disentangled;
  j["trivial"] = result.trivial_flags;
  return j;
}

// Rebuilds the load-bearing parts of a run (parameters, Q tables, final
// report); the step-by-step history stays in the run's CSV log.
inline TrainResult result_from_json(const Json& j) {
  TrainResult result;
  result.mode = j.at("mode").get<std::string>() == "exact" ? TrainMode::kExact : TrainMode::kSampled;
  result.seed = j.at("seed").get<std::uint64_t>();
  result.params.logits = mat_from_json(j.at("logits"));
  result.params.version = j.at("param_version").get<std::uint64_t>();
  for (const Json& table : j.at("q_tables")) result.policy_set.q.push_back(mat_from_json(table));
  result.policy_set.version.assign(result.policy_set.q.size(), result.params.version);
  const Json& fin = j.at("final");
  result.final_report.j_independent = fin.at("j_independent").get<double>();
  result.final_report.j_nontrivial = fin.at("j_nontrivial").get<double>();
  result.final_report.j_disentangled = fin.at("j_disentangled").get<double>();
  result.final_report.value_matrix = mat_from_json(fin.at("value_matrix"));
  result.final_report.alpha.diag = mat_from_json(fin.at("alpha_diag"));
  result.final_report.alpha.off_diag = fin.at("alpha_off_diag").get<double>();
  result.final_j_disentangled = j.at("final_j_disentangled").get<double>();
  result.trivial_flags = j.at("trivial").get<std::vector<bool>>();
  return result;
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed on '" + path + "'");
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return Json::parse(in);
}

}  // namespace rdx
