// belldiag: simulate noisy cluster states, maximize Bell values per grouping,
// fit noise parameters to measured values, render reports, run self-tests.
//
// Exit codes: 0 success, 2 invalid input, 3 search did not converge.

#include "belldiag/diagnostics.hpp"
#include "belldiag/errors.hpp"
#include "belldiag/io.hpp"
#include "belldiag/network.hpp"
#include "belldiag/parallel.hpp"
#include "belldiag/report.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <iostream>
#include <random>
#include <sstream>

namespace bd = belldiag;

namespace {

struct Options {
  std::string topology_file;
  std::string model = "gatefailure";
  std::string params;
  std::string restriction = "fullsphere";
  std::string settings = "frozen";
  std::string frame = "canonical";
  double grid = 0.02;
  std::uint64_t seed = 20160917;
  std::string out;
  std::string format = "json";
  int threads = 0;
  int starts = 64;
  int max_evals = 20000;

  std::string measurements;
  int bootstrap = 200;
  bool sigma_weighted = false;
  std::string input;
  double sigma = 0.0;
  int trials = 1;
};

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw bd::ValidationError(flag + ": '" + item + "' is not a number");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size() || !std::isfinite(v)) throw bd::ValidationError(flag + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw bd::ValidationError(flag + ": empty list");
  return out;
}

bd::Topology load_topology(const Options& o) {
  return o.topology_file.empty() ? bd::Topology::photonic_chain4() : bd::topology_from_json(bd::read_json_file(o.topology_file));
}

bd::FitConfig make_config(const Options& o) {
  bd::FitConfig c;
  c.model = bd::NoiseModel::from_name(o.model);
  c.restriction = bd::restriction_from_string(o.restriction);
  c.settings_policy = bd::settings_policy_from_string(o.settings);
  c.frame = bd::frame_from_string(o.frame);
  c.grid_resolution = o.grid;
  c.seed = o.seed;
  c.sigma_weighted = o.sigma_weighted;
  c.search.seed = o.seed;
  c.search.threads = o.threads;
  c.search.starts = o.starts;
  c.max_refine_evaluations = o.max_evals;
  try {
    c.validate();
  } catch (const bd::ValidationError& e) {
    throw bd::ValidationError(std::string("--grid: ") + e.what());
  }
  return c;
}

bd::ParamVector parse_params(const Options& o, const bd::Topology& top, const bd::NoiseModel& model) {
  const auto k = model.arity(top);
  if (o.params.empty()) return bd::ParamVector(std::vector<double>(k, 1.0));
  const auto v = parse_list(o.params, "--params");
  if (v.size() != k) {
    throw bd::ValidationError("--params: model " + model.name() + " takes " + std::to_string(k) + " values, got " +
                              std::to_string(v.size()));
  }
  try {
    return bd::ParamVector(v);
  } catch (const bd::ValidationError& e) {
    throw bd::ValidationError(std::string("--params: ") + e.what());
  }
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text;
  } else {
    bd::write_file_atomic(o.out, text);
  }
}

std::string dump(const bd::Json& j) { return j.dump(2) + "\n"; }

bd::Ket graph_state(const bd::Topology& top) {
  const std::size_t d = bd::dim_of(top.n_qubits);
  bd::CVector amps(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) {
    int parity = 0;
    for (const auto& [a, b] : top.edges) {
      parity ^= static_cast<int>(((i >> (top.n_qubits - 1 - a)) & 1U) & ((i >> (top.n_qubits - 1 - b)) & 1U));
    }
    amps(static_cast<Eigen::Index>(i)) = (parity ? -1.0 : 1.0) / std::sqrt(static_cast<double>(d));
  }
  return bd::Ket(top.n_qubits, amps);
}

int cmd_simulate(const Options& o) {
  const auto top = load_topology(o);
  const auto model = bd::NoiseModel::from_name(o.model);
  const auto p = parse_params(o, top, model);
  const auto rho = bd::build_network_state(top, model, p);
  const bd::Json j{{"model", model.name()},
                   {"params", p.values()},
                   {"n_qubits", top.n_qubits},
                   {"fidelity", bd::fidelity(rho, graph_state(top))},
                   {"purity", rho.purity()},
                   {"min_eigenvalue", rho.min_eigenvalue()},
                   {"trace", rho.trace()}};
  if (o.format == "text") {
    std::ostringstream os;
    os << "model " << model.name() << "\nfidelity " << j["fidelity"].get<double>() << "\npurity "
       << j["purity"].get<double>() << "\n";
    emit(o, os.str());
  } else {
    emit(o, dump(j));
  }
  return 0;
}

int cmd_max(const Options& o) {
  const auto top = load_topology(o);
  const auto cfg = make_config(o);
  const auto groups = bd::standard_groupings(top);
  const auto maxima = bd::all_mabk_groupwise_maxima(top, cfg);
  bd::Json rows = bd::Json::array();
  std::ostringstream os;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double bound = std::ldexp(1.0, static_cast<int>(groups[g].keep.size()));
    rows.push_back({{"id", maxima[g].id}, {"label", groups[g].label(top)}, {"plan", groups[g].plan()},
                    {"value", maxima[g].value}, {"lhv_bound", bound}});
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %-24s %-14s %8.3f  (LHV %g)\n", maxima[g].id.c_str(),
                  groups[g].label(top).c_str(), groups[g].plan().c_str(), maxima[g].value, bound);
    os << line;
  }
  if (o.format == "text") {
    emit(o, os.str());
  } else {
    emit(o, dump(bd::Json{{"restriction", bd::to_string(cfg.restriction)}, {"frame", bd::to_string(cfg.frame)}, {"groupings", rows}}));
  }
  return 0;
}

int cmd_fit(const Options& o) {
  if (o.measurements.empty()) throw bd::ValidationError("--measurements: required");
  if (o.bootstrap != 0 && o.bootstrap < 100) throw bd::ValidationError("--bootstrap: use 0 or at least 100 resamples");
  const auto top = load_topology(o);
  const auto cfg = make_config(o);
  const auto meas = bd::measurements_from_json(bd::read_json_file(o.measurements));
  const bd::Predictor predictor(top, cfg);
  auto result = bd::fit(meas.observations, predictor);
  if (o.bootstrap > 0) {
    const auto est = bd::estimate_uncertainty(meas.observations, predictor, o.bootstrap, o.seed);
    if (est.warning) std::cerr << "warning: " << *est.warning << "\n";
    result.uncertainties = est.stds;
  }
  const auto report = bd::render_report(result, top);
  emit(o, o.format == "text" ? bd::to_text(report) : dump(bd::report_to_json(report)));
  return 0;
}

int cmd_report(const Options& o) {
  if (o.input.empty()) throw bd::ValidationError("--input: required");
  const auto report = bd::report_from_json(bd::read_json_file(o.input));
  emit(o, o.format == "json" ? dump(bd::report_to_json(report)) : bd::to_text(report));
  return 0;
}

int cmd_selftest(const Options& o) {
  if (o.trials < 1) throw bd::ValidationError("--trials: must be >= 1");
  if (!(o.sigma >= 0.0)) throw bd::ValidationError("--sigma: must be >= 0");
  const auto top = load_topology(o);
  const auto cfg = make_config(o);
  const bd::Predictor predictor(top, cfg);
  const auto k = predictor.arity();
  bd::Json runs = bd::Json::array();
  double mean = 0.0, worst = 0.0;
  for (int t = 0; t < o.trials; ++t) {
    bd::ParamVector truth;
    if (o.params.empty()) {
      auto rng = bd::substream(o.seed, static_cast<std::uint64_t>(t), 1);
      std::uniform_real_distribution<double> u(0.6, 1.0);
      std::vector<double> v(k);
      for (auto& x : v) x = u(rng);
      truth = bd::ParamVector(v);
    } else {
      truth = parse_params(o, top, cfg.model);
    }
    const auto rep = bd::synthetic_selftest(predictor, truth, o.sigma, o.seed + static_cast<std::uint64_t>(t));
    runs.push_back(bd::selftest_to_json(rep));
    mean += rep.mean_error;
    worst = std::max(worst, rep.max_error);
  }
  mean /= o.trials;
  if (o.format == "text") {
    std::ostringstream os;
    os << "trials " << o.trials << ", sigma " << o.sigma << "\nmean abs error " << mean << "\nmax abs error " << worst << "\n";
    emit(o, os.str());
  } else {
    emit(o, dump(bd::Json{{"model", cfg.model.name()}, {"sigma", o.sigma}, {"trials", o.trials},
                          {"mean_abs_error", mean}, {"max_abs_error", worst}, {"runs", runs}}));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bell-value diagnostics for noisy cluster-state networks"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;

  app.add_option("--topology", o.topology_file, "topology JSON (default: labelled 4-qubit chain)")->check(CLI::ExistingFile);
  app.add_option("--model", o.model, "gatefailure | dephasing | hybrid | hybrid-depolarizing, optional +global");
  app.add_option("--params", o.params, "comma-separated parameter values");
  app.add_option("--restriction", o.restriction, "equatorial | fullsphere")->check(CLI::IsMember({"equatorial", "fullsphere"}));
  app.add_option("--settings", o.settings, "frozen | reoptimized")->check(CLI::IsMember({"frozen", "reoptimized"}));
  app.add_option("--frame", o.frame, "canonical | photonic")->check(CLI::IsMember({"canonical", "photonic"}));
  app.add_option("--grid", o.grid, "coarse grid step in (0, 0.5]");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--out", o.out, "output file (default: stdout)");
  app.add_option("--format", o.format, "json | text")->check(CLI::IsMember({"json", "text"}));
  app.add_option("--threads", o.threads, "worker threads (default: BELLDIAG_THREADS or all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--starts", o.starts, "random starts for the settings search")->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "build the noisy state and summarize it");
  auto* max = app.add_subcommand("max", "maximized Bell value for every standard grouping");
  auto* fitc = app.add_subcommand("fit", "fit noise parameters to measured Bell values");
  fitc->add_option("--measurements", o.measurements, "measurements JSON")->required()->check(CLI::ExistingFile);
  fitc->add_option("--bootstrap", o.bootstrap, "bootstrap resamples (0 disables)");
  fitc->add_option("--max-evals", o.max_evals, "simplex refinement budget")->check(CLI::PositiveNumber);
  fitc->add_flag("--sigma-weighted", o.sigma_weighted, "divide residuals by sigma");
  auto* report = app.add_subcommand("report", "render a saved fit report");
  report->add_option("--input", o.input, "report JSON written by fit")->required()->check(CLI::ExistingFile);
  auto* selftest = app.add_subcommand("selftest", "fit synthetic data generated from known parameters");
  selftest->add_option("--sigma", o.sigma, "Gaussian noise on each synthetic value");
  selftest->add_option("--trials", o.trials, "number of seeded trials");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(o);
    if (max->parsed()) return cmd_max(o);
    if (fitc->parsed()) return cmd_fit(o);
    if (report->parsed()) return cmd_report(o);
    if (selftest->parsed()) return cmd_selftest(o);
  } catch (const bd::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
