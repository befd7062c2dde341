#include "perturbmc/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "perturbmc/csv.hpp"
#include "perturbmc/version.hpp"

namespace perturbmc {

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::IoFailure, "cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw Error(Errc::BadConfig, path + ": " + e.what());
  }
  return j;
}

Matrix matrix_from_json(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty()) throw Error(Errc::BadConfig, name + " must be a matrix");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.at(0).size());
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j.at(i).size()) != cols)
      throw Error(Errc::BadConfig, name + " has ragged rows");
    for (int c = 0; c < cols; ++c) M(i, c) = j.at(i).at(c).get<double>();
  }
  return M;
}

Vector vector_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) throw Error(Errc::BadConfig, name + " must be an array");
  Vector v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

}  // namespace

LoadedModel load_model(const RunConfig& cfg) {
  LoadedModel out;
  if (cfg.model == "queue") {
    QueueModel qm = build_queue_model(0.9, 18);
    out.family = std::move(qm.family);
    out.is_queue = true;
    out.rho = qm.rho;
    out.q_bar = qm.q_bar;
    out.description = "queue rho=0.9 q_bar=18";
    return out;
  }
  json j = load_json(cfg.model);
  if (j.contains("builtin")) {
    std::string name = j.at("builtin").get<std::string>();
    if (name != "queue") throw Error(Errc::BadConfig, "unknown builtin model " + name);
    double rho = j.value("rho", 0.9);
    int q_bar = j.value("q_bar", 18);
    QueueModel qm = build_queue_model(rho, q_bar);
    out.family = std::move(qm.family);
    out.is_queue = true;
    out.rho = rho;
    out.q_bar = q_bar;
    out.description = "queue rho=" + format_double(rho) + " q_bar=" + std::to_string(q_bar);
    return out;
  }
  Matrix P0 = matrix_from_json(j.at("P0"), "P0");
  Matrix E = matrix_from_json(j.at("E"), "E");
  Matrix W = j.contains("W") ? matrix_from_json(j.at("W"), "W")
                             : Matrix(Matrix::Zero(P0.rows(), P0.cols()));
  double lo = j.value("zeta_min", -1.0), hi = j.value("zeta_max", 1.0);
  out.family = make_family(validate_stochastic(P0), std::move(E), std::move(W), nullptr, lo, hi);
  out.description = "matrix model " + cfg.model;
  return out;
}

InputSpec load_input(const RunConfig& cfg, double epsilon) {
  if (cfg.input == "three-state") return three_state_input(cfg.gamma, epsilon);
  json j = load_json(cfg.input);
  // a file-level epsilon is the default when no sweep was requested
  double e = cfg.epsilon_list.empty() ? j.value("epsilon", epsilon) : epsilon;
  if (j.contains("builtin")) {
    std::string name = j.at("builtin").get<std::string>();
    if (name != "three-state") throw Error(Errc::BadConfig, "unknown builtin input " + name);
    return three_state_input(j.value("gamma", cfg.gamma), e);
  }
  Vector states = vector_from_json(j.at("states"), "states");
  Matrix K = matrix_from_json(j.at("K"), "K");
  return make_input(std::move(states), std::move(K), e);
}

void parse_lag_range(const std::string& text, int& lag_min, int& lag_max) {
  auto pos = text.find(':');
  try {
    if (pos == std::string::npos) {
      int n = std::stoi(text);
      if (n < 0) throw Error(Errc::BadConfig, "lag bound must be nonnegative");
      lag_min = -n;
      lag_max = n;
    } else {
      lag_min = std::stoi(text.substr(0, pos));
      lag_max = std::stoi(text.substr(pos + 1));
    }
  } catch (const std::invalid_argument&) {
    throw Error(Errc::BadConfig, "bad lag range '" + text + "'");
  }
  if (lag_min > lag_max) throw Error(Errc::BadConfig, "empty lag range");
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::invalid_argument&) {
      throw Error(Errc::BadConfig, "bad number '" + item + "'");
    }
  }
  if (out.empty()) throw Error(Errc::BadConfig, "empty list");
  return out;
}

std::string config_stamp(const RunConfig& cfg, double epsilon) {
  std::string s;
  s += "model=" + cfg.model;
  s += " input=" + cfg.input;
  s += " gamma=" + format_double(cfg.gamma);
  s += " epsilon=" + format_double(epsilon);
  s += " lags=" + std::to_string(cfg.lag_min) + ":" + std::to_string(cfg.lag_max);
  s += " grid=" + std::to_string(cfg.grid);
  s += " seed=" + std::to_string(cfg.seed);
  s += " version=" + std::string(kVersion);
  return s;
}

}  // namespace perturbmc
