#include "belldiag/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace belldiag {

namespace {

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

Report render_report(const FitResult& fit, const Topology& top) {
  Report r;
  r.model = fit.model;
  r.parameter_names = fit.parameter_names;
  r.params = fit.params.values();
  r.uncertainties = fit.uncertainties;
  const auto groups = fit.config.groupings.empty() ? standard_groupings(top) : fit.config.groupings;
  for (std::size_t g = 0; g < fit.grouping_ids.size(); ++g) {
    const auto it = std::find_if(groups.begin(), groups.end(), [&](const Grouping& x) { return x.id() == fit.grouping_ids[g]; });
    r.rows.push_back({fit.grouping_ids[g], it == groups.end() ? fit.grouping_ids[g] : it->label(top), fit.exclusion_plans[g],
                      fit.observed[g], fit.sigmas[g], fit.predicted[g], fit.residuals[g]});
  }
  for (const auto& l : fit.links) {
    r.links.push_back({std::to_string(l.edge.first + 1) + "-" + std::to_string(l.edge.second + 1),
                       top.label(l.edge.first) + "-" + top.label(l.edge.second), l.value});
  }
  if (!r.links.empty()) {
    double lo = r.links[0].value;
    for (const auto& l : r.links) lo = std::min(lo, l.value);
    for (std::size_t i = 0; i < r.links.size(); ++i) {
      if (r.links[i].value <= lo + kLinkTie) r.weakest_ties.push_back(i);
    }
    r.weakest = r.weakest_ties.front();
  }
  r.objective = fit.objective;
  r.restriction = to_string(fit.config.restriction);
  r.settings_policy = to_string(fit.config.settings_policy);
  r.frame = to_string(fit.config.frame);
  r.grid_resolution = fit.config.grid_resolution;
  r.refine_tolerance = fit.config.refine_tolerance;
  r.sigma_weighted = fit.config.sigma_weighted;
  r.seed = fit.config.seed;
  return r;
}

std::string to_text(const Report& r) {
  std::ostringstream os;
  os << "model: " << r.model << "\n\nparameters\n";
  for (std::size_t i = 0; i < r.params.size(); ++i) {
    os << "  " << pad(r.parameter_names[i], 6) << fmt(r.params[i]);
    if (i < r.uncertainties.size()) os << " +- " << fmt(r.uncertainties[i]);
    os << '\n';
  }
  os << "\n  " << pad("group", 10) << pad("qubits", 24) << pad("plan", 14) << pad("observed", 10) << pad("sigma", 8)
     << pad("predicted", 11) << "residual\n";
  for (const auto& row : r.rows) {
    os << "  " << pad(row.id, 10) << pad(row.label, 24) << pad(row.plan, 14) << pad(fmt(row.observed, 3), 10)
       << pad(fmt(row.sigma, 3), 8) << pad(fmt(row.predicted, 3), 11) << fmt(row.residual, 3) << '\n';
  }
  os << "  objective (sum |residual|" << (r.sigma_weighted ? " / sigma" : "") << "): " << fmt(r.objective) << "\n\nlinks\n";
  for (std::size_t i = 0; i < r.links.size(); ++i) {
    const bool tied = std::find(r.weakest_ties.begin(), r.weakest_ties.end(), i) != r.weakest_ties.end();
    os << "  " << pad(r.links[i].edge, 6) << pad(r.links[i].label, 14) << fmt(r.links[i].value);
    if (i == r.weakest) os << (r.weakest_ties.size() > 1 ? "  weakest (tied)" : "  weakest");
    else if (tied) os << "  tied";
    os << '\n';
  }
  os << "\nrestriction " << r.restriction << ", settings " << r.settings_policy << ", frame " << r.frame << ", grid "
     << r.grid_resolution << ", refine " << r.refine_tolerance << ", seed " << r.seed << '\n';
  return os.str();
}

}  // namespace belldiag
