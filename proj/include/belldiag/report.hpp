#pragma once

#include "belldiag/diagnostics.hpp"
#include "belldiag/network.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace belldiag {

struct ReportRow {
  std::string id;
  std::string label;
  std::string plan;
  double observed = 0.0;
  double sigma = 0.0;
  double predicted = 0.0;
  /// predicted - observed
  double residual = 0.0;

  bool operator==(const ReportRow&) const = default;
};

struct ReportLink {
  /// "3-4" (1-based)
  std::string edge;
  /// "k_A-k_B"
  std::string label;
  double value = 0.0;

  bool operator==(const ReportLink&) const = default;
};

struct Report {
  std::string model;
  std::vector<std::string> parameter_names;
  std::vector<double> params;
  std::vector<double> uncertainties;
  std::vector<ReportRow> rows;
  std::vector<ReportLink> links;
  /// Index into links of the weakest one; lowest index among ties.
  std::size_t weakest = 0;
  /// Every link tied at the minimum (size 1 when unique).
  std::vector<std::size_t> weakest_ties;
  double objective = 0.0;

  std::string restriction;
  std::string settings_policy;
  std::string frame;
  double grid_resolution = 0.0;
  double refine_tolerance = 0.0;
  bool sigma_weighted = false;
  std::uint64_t seed = 0;

  bool operator==(const Report&) const = default;
};

/// Absolute slack under which two link strengths count as tied.
inline constexpr double kLinkTie = 1e-12;

Report render_report(const FitResult& fit, const Topology& top);

/// Plain-text table.
std::string to_text(const Report& report);

}  // namespace belldiag
