#include "belldiag/io.hpp"

#include "belldiag/errors.hpp"

#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

namespace belldiag {

namespace {

template <typename T>
T get(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(where + ": bad value for '" + key + "'");
  }
}

std::map<int, std::string> labels_from_json(const Json& j, int n, const std::string& where) {
  std::map<int, std::string> out;
  if (!j.is_object()) throw ValidationError(where + ": labels must be an object");
  for (const auto& [k, v] : j.items()) {
    int q = 0;
    try {
      std::size_t used = 0;
      q = std::stoi(k, &used);
      if (used != k.size()) throw std::invalid_argument(k);
    } catch (const std::exception&) {
      throw ValidationError(where + ": label key '" + k + "' is not a qubit number");
    }
    if (q < 1 || (n > 0 && q > n)) throw ValidationError(where + ": label for qubit " + k + " out of range");
    if (!v.is_string()) throw ValidationError(where + ": label for qubit " + k + " must be a string");
    out[q - 1] = v.get<std::string>();
  }
  return out;
}

Json labels_to_json(const std::map<int, std::string>& labels) {
  Json j = Json::object();
  for (const auto& [q, name] : labels) j[std::to_string(q + 1)] = name;
  return j;
}

}  // namespace

Json topology_to_json(const Topology& top) {
  Json edges = Json::array();
  for (const auto& [a, b] : top.edges) edges.push_back({a + 1, b + 1});
  Json j{{"n", top.n_qubits}, {"edges", edges}, {"labels", labels_to_json(top.labels)}};
  if (!top.dephasing_axes.empty()) {
    Json axes = Json::object();
    for (const auto& [q, axis] : top.dephasing_axes) axes[std::to_string(q + 1)] = to_string(axis);
    j["dephasing_axes"] = axes;
  }
  return j;
}

Topology topology_from_json(const Json& j) {
  Topology top;
  top.n_qubits = get<int>(j, "n", "topology");
  for (const auto& e : get<std::vector<std::vector<int>>>(j, "edges", "topology")) {
    if (e.size() != 2) throw ValidationError("topology: each edge needs two qubits");
    top.edges.emplace_back(e[0] - 1, e[1] - 1);
  }
  if (j.contains("labels")) top.labels = labels_from_json(j.at("labels"), top.n_qubits, "topology");
  if (j.contains("dephasing_axes")) {
    for (const auto& [q, name] : labels_from_json(j.at("dephasing_axes"), top.n_qubits, "topology dephasing_axes")) {
      top.dephasing_axes[q] = pauli_axis_from_string(name);
    }
  }
  top.validate();
  return top;
}

MeasurementSet measurements_from_json(const Json& j) {
  MeasurementSet m;
  if (j.contains("labels")) m.labels = labels_from_json(j.at("labels"), 0, "measurements");
  const auto obs = j.contains("observations") ? j.at("observations") : Json();
  if (!obs.is_array()) throw ValidationError("measurements: 'observations' must be an array");
  for (const auto& o : obs) {
    Observation x;
    for (int q : get<std::vector<int>>(o, "keep", "observation")) x.keep.push_back(q - 1);
    x.value = get<double>(o, "value", "observation");
    x.sigma = o.contains("sigma") ? get<double>(o, "sigma", "observation") : 0.0;
    if (x.sigma < 0.0) throw ValidationError("observation: sigma must be >= 0");
    m.observations.push_back(std::move(x));
  }
  return m;
}

Json measurements_to_json(const MeasurementSet& m) {
  Json obs = Json::array();
  for (const auto& o : m.observations) {
    Json keep = Json::array();
    for (int q : o.keep) keep.push_back(q + 1);
    obs.push_back({{"keep", keep}, {"value", o.value}, {"sigma", o.sigma}});
  }
  return Json{{"labels", labels_to_json(m.labels)}, {"observations", obs}};
}

Json report_to_json(const Report& r) {
  Json params = Json::array();
  for (std::size_t i = 0; i < r.params.size(); ++i) {
    Json p{{"name", r.parameter_names[i]}, {"value", r.params[i]}};
    if (i < r.uncertainties.size()) p["std"] = r.uncertainties[i];
    params.push_back(p);
  }
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"id", row.id}, {"label", row.label}, {"plan", row.plan}, {"observed", row.observed},
                    {"sigma", row.sigma}, {"predicted", row.predicted}, {"residual", row.residual}});
  }
  Json links = Json::array();
  for (const auto& l : r.links) links.push_back({{"edge", l.edge}, {"label", l.label}, {"value", l.value}});
  return Json{{"model", r.model},
              {"params", params},
              {"residuals", rows},
              {"objective", r.objective},
              {"links", links},
              {"weakest_link", r.weakest},
              {"weakest_ties", r.weakest_ties},
              {"config",
               {{"restriction", r.restriction},
                {"settings_policy", r.settings_policy},
                {"frame", r.frame},
                {"grid_resolution", r.grid_resolution},
                {"refine_tolerance", r.refine_tolerance},
                {"sigma_weighted", r.sigma_weighted},
                {"seed", r.seed}}}};
}

Report report_from_json(const Json& j) {
  Report r;
  r.model = get<std::string>(j, "model", "report");
  bool any_std = false;
  for (const auto& p : get<Json>(j, "params", "report")) {
    r.parameter_names.push_back(get<std::string>(p, "name", "report param"));
    r.params.push_back(get<double>(p, "value", "report param"));
    if (p.contains("std")) {
      any_std = true;
      r.uncertainties.push_back(get<double>(p, "std", "report param"));
    }
  }
  if (any_std && r.uncertainties.size() != r.params.size()) throw ValidationError("report: partial uncertainties");
  for (const auto& row : get<Json>(j, "residuals", "report")) {
    r.rows.push_back({get<std::string>(row, "id", "row"), get<std::string>(row, "label", "row"),
                      get<std::string>(row, "plan", "row"), get<double>(row, "observed", "row"),
                      get<double>(row, "sigma", "row"), get<double>(row, "predicted", "row"),
                      get<double>(row, "residual", "row")});
  }
  for (const auto& l : get<Json>(j, "links", "report")) {
    r.links.push_back({get<std::string>(l, "edge", "link"), get<std::string>(l, "label", "link"), get<double>(l, "value", "link")});
  }
  r.objective = get<double>(j, "objective", "report");
  r.weakest = get<std::size_t>(j, "weakest_link", "report");
  r.weakest_ties = get<std::vector<std::size_t>>(j, "weakest_ties", "report");
  const auto c = get<Json>(j, "config", "report");
  r.restriction = get<std::string>(c, "restriction", "config");
  r.settings_policy = get<std::string>(c, "settings_policy", "config");
  r.frame = get<std::string>(c, "frame", "config");
  r.grid_resolution = get<double>(c, "grid_resolution", "config");
  r.refine_tolerance = get<double>(c, "refine_tolerance", "config");
  r.sigma_weighted = get<bool>(c, "sigma_weighted", "config");
  r.seed = get<std::uint64_t>(c, "seed", "config");
  return r;
}

Json selftest_to_json(const SelftestReport& r) {
  return Json{{"true_params", r.true_params},
              {"recovered", r.recovered},
              {"abs_errors", r.abs_errors},
              {"max_error", r.max_error},
              {"mean_error", r.mean_error}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw ValidationError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ValidationError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

}  // namespace belldiag
