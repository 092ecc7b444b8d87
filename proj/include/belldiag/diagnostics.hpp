#pragma once

// Sub-grouping extraction, predicted Bell values as functions of the noise
// parameters, L1 fitting, bootstrap uncertainties and synthetic self-tests.

#include "belldiag/network.hpp"
#include "belldiag/quantum.hpp"
#include "belldiag/wwzb.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace belldiag {

enum class SettingsPolicy { FrozenIdeal, Reoptimized };
/// Frame in which exclusions and settings are expressed. Photonic applies
/// canonical_frame_map() to the chain state first.
enum class Frame { Canonical, Photonic };

std::string to_string(SettingsPolicy p);
std::string to_string(Frame f);
SettingsPolicy settings_policy_from_string(const std::string& s);
Frame frame_from_string(const std::string& s);
BlochObservable observable_of(PauliAxis a);

struct Exclusion {
  int qubit = 0;
  PauliAxis basis = PauliAxis::Z;
  /// Post-selected eigenvalue.
  int outcome = 1;

  bool operator==(const Exclusion&) const = default;
};

struct Grouping {
  /// Ascending, 0-based.
  std::vector<int> keep;
  /// Applied in order; together they cover the complement of `keep`.
  std::vector<Exclusion> exclusions;

  /// "1-2-4" (1-based).
  std::string id() const;
  /// "(pi_A, pi_B, k_B)".
  std::string label(const Topology& top) const;
  /// "3:Z+" per exclusion, comma separated.
  std::string plan() const;
  void validate(int n_qubits) const;

  bool operator==(const Grouping&) const = default;
};

/// Grouping for `keep` with every excluded qubit measured along `basis`.
Grouping make_grouping(std::vector<int> keep, int n_qubits, PauliAxis basis = PauliAxis::Z);

/// The eleven four-, three- and two-qubit groupings of the 4-chain with the
/// default exclusion plans, full cluster first, then the reference row order.
std::vector<Grouping> standard_groupings(const Topology& top);

DensityMatrix extract_group_state(const DensityMatrix& state, const Grouping& g);

struct Observation {
  std::vector<int> keep;
  double value = 0.0;
  double sigma = 0.0;
};

struct FitConfig {
  NoiseModel model = NoiseModel::gate_failure();
  Restriction restriction = Restriction::FullSphere;
  SettingsPolicy settings_policy = SettingsPolicy::FrozenIdeal;
  Frame frame = Frame::Canonical;
  double grid_resolution = 0.02;
  double refine_tolerance = 1e-5;
  int max_refine_evaluations = 20000;
  /// Coarse-grid step used by each bootstrap refit.
  double bootstrap_grid_resolution = 0.05;
  /// Divide each residual by its sigma (off: plain L1).
  bool sigma_weighted = false;
  std::uint64_t seed = 20160917;
  SearchConfig search;
  /// Empty means standard_groupings(top).
  std::vector<Grouping> groupings;

  void validate() const;
};

/// Evaluates the per-grouping Bell values of the noisy network.
///
/// With FrozenIdeal settings each value is |Tr(rho N_g)| / Tr(rho P_g) for
/// fixed operators, and rho is a polynomial in the parameters of known
/// degree, so predictions come from exact tensor-product interpolation
/// between precomputed node states. predict_direct() takes the long way
/// through state construction, extraction and the correlation tensor.
class Predictor {
 public:
  Predictor(Topology top, FitConfig config);

  const Topology& topology() const { return top_; }
  const FitConfig& config() const { return config_; }
  const std::vector<Grouping>& groupings() const { return groupings_; }
  std::size_t arity() const { return config_.model.arity(top_); }
  std::size_t size() const { return groupings_.size(); }

  /// Maxima on the ideal state, one per grouping.
  const std::vector<double>& ideal_values() const { return ideal_values_; }
  /// Settings used under FrozenIdeal (optimal on the ideal state).
  const std::vector<SettingsTable>& frozen_settings() const { return frozen_; }

  std::vector<double> predict(const ParamVector& params) const;
  std::vector<double> predict_direct(const ParamVector& params) const;

  /// State in the evaluation frame.
  DensityMatrix network_state(const ParamVector& params) const;

  // Interpolation data, exposed for the grid scanner.
  struct Surrogate {
    std::vector<int> nodes_per_param;
    /// [node combination][2 * grouping + {0: numerator, 1: denominator}]
    std::vector<double> values;
  };
  const Surrogate& surrogate() const { return surrogate_; }
  bool has_surrogate() const { return !surrogate_.values.empty(); }

 private:
  Topology top_;
  FitConfig config_;
  std::vector<Grouping> groupings_;
  std::vector<SignFunction> signs_;
  std::vector<double> ideal_values_;
  std::vector<SettingsTable> frozen_;
  std::vector<CMatrix> numerators_;
  std::vector<CMatrix> denominators_;
  Surrogate surrogate_;
};

/// predicted_wwzb for a one-off evaluation.
std::vector<double> predicted_wwzb(const ParamVector& params, const Topology& top, const FitConfig& config);

struct LinkStrength {
  Edge edge;
  double value = 0.0;
};

std::vector<LinkStrength> link_strengths(const NoiseModel& model, const Topology& top, const ParamVector& params);

struct FitResult {
  std::string model;
  std::vector<std::string> parameter_names;
  ParamVector params;
  std::vector<double> uncertainties;
  std::vector<std::string> grouping_ids;
  std::vector<std::string> exclusion_plans;
  std::vector<double> observed;
  std::vector<double> sigmas;
  std::vector<double> predicted;
  /// predicted - observed
  std::vector<double> residuals;
  double objective = 0.0;
  std::vector<LinkStrength> links;
  FitConfig config;
  std::size_t grid_points = 0;
  int refine_evaluations = 0;
};

/// Observations aligned to the predictor's groupings (by kept set).
std::vector<Observation> align_observations(const std::vector<Observation>& obs, const Predictor& predictor);

double fit_objective(const std::vector<double>& predicted, const std::vector<Observation>& aligned, bool sigma_weighted);

/// Coarse grid over [0,1]^k followed by Nelder-Mead refinement of the L1
/// distance between predicted and observed values. Qubit-dephasing fits on
/// the four-chain report the equivalent point (1, q_12, q_34, 1).
FitResult fit(const std::vector<Observation>& obs, const Predictor& predictor);
FitResult fit(const std::vector<Observation>& obs, const Topology& top, const FitConfig& config);

/// Grid values 0, h, 2h, ..., 1.
std::vector<double> grid_axis(double step);

struct UncertaintyEstimate {
  std::vector<double> stds;
  int resamples = 0;
  /// Set when every sigma is zero and the bootstrap is trivially degenerate.
  std::optional<std::string> warning;
};

/// Parametric bootstrap: redraw each observation from N(value, sigma), refit,
/// report the sample standard deviation per parameter.
UncertaintyEstimate estimate_uncertainty(const std::vector<Observation>& obs, const Predictor& predictor,
                                         int n_resamples, std::uint64_t seed);

struct SelftestReport {
  std::vector<double> true_params;
  std::vector<double> recovered;
  std::vector<double> abs_errors;
  double max_error = 0.0;
  double mean_error = 0.0;
};

SelftestReport synthetic_selftest(const Predictor& predictor, const ParamVector& true_params, double noise_sigma,
                                  std::uint64_t seed);

struct GroupMaximum {
  std::string id;
  double value = 0.0;
};

/// Maximized MABK value on the ideal post-exclusion state of every grouping.
std::vector<GroupMaximum> all_mabk_groupwise_maxima(const Topology& top, const FitConfig& config);

/// Search over frames, restrictions and Z/X exclusion plans for the
/// configuration whose ideal maxima best match `targets` (one per standard
/// grouping). Score: number of matches within `tolerance`, then total
/// absolute residual.
struct PlanSearchResult {
  Frame frame = Frame::Canonical;
  Restriction restriction = Restriction::FullSphere;
  std::vector<Grouping> groupings;
  std::vector<double> values;
  std::vector<double> residuals;
  int matched = 0;
  double total_residual = 0.0;
};

PlanSearchResult search_exclusion_plans(const Topology& top, const std::vector<double>& targets, double tolerance,
                                        const SearchConfig& search);

}  // namespace belldiag
