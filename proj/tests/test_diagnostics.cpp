#include "belldiag/diagnostics.hpp"
#include "belldiag/errors.hpp"
#include "belldiag/io.hpp"
#include "belldiag/report.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace belldiag;
namespace ts = testing_support;

namespace {

const Topology& chain4() {
  static const Topology t = Topology::photonic_chain4();
  return t;
}

FitConfig config_for(NoiseModel model) {
  FitConfig c;
  c.model = model;
  c.search.starts = 24;
  return c;
}

const Predictor& gate_failure_predictor() {
  static const Predictor p(chain4(), config_for(NoiseModel::gate_failure()));
  return p;
}

const Predictor& hybrid_predictor() {
  static const Predictor p(chain4(), config_for(NoiseModel::hybrid()));
  return p;
}

std::vector<Observation> observations_at(const Predictor& p, const std::vector<double>& params, double sigma = 0.1) {
  const auto values = p.predict(ParamVector(params));
  std::vector<Observation> obs;
  for (std::size_t g = 0; g < values.size(); ++g) obs.push_back({p.groupings()[g].keep, values[g], sigma});
  return obs;
}

std::vector<Observation> measured() {
  return measurements_from_json(read_json_file(std::string(BELLDIAG_FIXTURES) + "/chain4_measurements.json")).observations;
}

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(StandardGroupings, ShapeAndCoverage) {
  const auto groups = standard_groupings(chain4());
  ASSERT_EQ(groups.size(), 11u);
  EXPECT_EQ(groups[0].keep, (std::vector<int>{0, 1, 2, 3}));
  EXPECT_TRUE(groups[0].exclusions.empty());
  const auto it = std::find_if(groups.begin(), groups.end(), [](const Grouping& g) { return g.id() == "1-2-4"; });
  ASSERT_NE(it, groups.end());
  ASSERT_EQ(it->exclusions.size(), 1u);
  EXPECT_EQ(it->exclusions[0].qubit, 2);
  std::set<std::string> ids;
  for (const auto& g : groups) {
    std::vector<int> all = g.keep;
    for (const auto& e : g.exclusions) all.push_back(e.qubit);
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, (std::vector<int>{0, 1, 2, 3}));
    ids.insert(g.id());
  }
  EXPECT_EQ(ids.size(), 11u);
  EXPECT_EQ(std::count_if(groups.begin(), groups.end(), [](const Grouping& g) { return g.keep.size() == 3; }), 4);
  EXPECT_EQ(std::count_if(groups.begin(), groups.end(), [](const Grouping& g) { return g.keep.size() == 2; }), 6);
  EXPECT_THROW(standard_groupings(Topology::chain(5)), ValidationError);
  EXPECT_EQ(it->label(chain4()), "(pi_A, pi_B, k_B)");
}

TEST(Grouping, Validation) {
  EXPECT_THROW(make_grouping({0}, 4), ValidationError);
  Grouping g = make_grouping({0, 1}, 4);
  g.exclusions.pop_back();
  EXPECT_THROW(g.validate(4), ValidationError);
  g = make_grouping({0, 1}, 4);
  g.exclusions.push_back({0, PauliAxis::Z, 1});
  EXPECT_THROW(g.validate(4), ValidationError);
  EXPECT_THROW(make_grouping({0, 5}, 4), ValidationError);
}

TEST(ExtractGroupState, KeepAllIsIdentity) {
  auto g = ts::rng(1);
  const auto rho = ts::random_state(4, g);
  EXPECT_EQ(max_abs(extract_group_state(rho, make_grouping({0, 1, 2, 3}, 4)).matrix() - rho.matrix()), 0.0);
}

TEST(ExtractGroupState, MatchesProjectorOracle) {
  auto g = ts::rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto rho = ts::random_state(4, g);
    std::vector<int> keep;
    for (int q = 0; q < 4; ++q)
      if (g() & 1U) keep.push_back(q);
    while (keep.size() < 2) {
      keep.push_back(static_cast<int>(g() % 4));
      std::sort(keep.begin(), keep.end());
      keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    }
    Grouping grp = make_grouping(keep, 4);
    CMatrix proj = CMatrix::Identity(16, 16);
    for (auto& ex : grp.exclusions) {
      ex.basis = (g() & 1U) ? PauliAxis::X : PauliAxis::Z;
      ex.outcome = (g() & 1U) ? 1 : -1;
      const CMatrix p1 = 0.5 * (CMatrix::Identity(2, 2) + ex.outcome * observable_of(ex.basis).matrix());
      proj = ts::embed(p1, ex.qubit, 4) * proj;
    }
    const CMatrix branch = proj * rho.matrix() * proj;
    const CMatrix want = ts::partial_trace_oracle(branch, 4, keep) / branch.trace().real();
    EXPECT_LT(max_abs(extract_group_state(rho, grp).matrix() - want), 1e-12);
  }
}

TEST(ExtractGroupState, ChainExamples) {
  const DensityMatrix c4 = canonical_chain_cluster().projector();
  EXPECT_NEAR(extract_group_state(c4, make_grouping({0, 1, 2}, 4)).purity(), 1.0, 1e-9);
  // Interior Z measurement splits the chain into a single qubit and a pair.
  SearchConfig cfg;
  cfg.starts = 32;
  const auto split = extract_group_state(c4, make_grouping({0, 2, 3}, 4));
  EXPECT_NEAR(maximize_settings(split, SignFunction::mabk(3), Restriction::FullSphere, cfg).value.value,
              8 * std::numbers::sqrt2, 1e-4);
}

TEST(ExtractGroupState, ZeroBranchNamesGrouping) {
  const DensityMatrix zero = Ket::basis(4, 0).projector();
  Grouping g = make_grouping({0, 1}, 4);
  g.exclusions[0].outcome = -1;
  try {
    extract_group_state(zero, g);
    FAIL() << "expected ZeroProbabilityError";
  } catch (const ZeroProbabilityError& e) {
    EXPECT_NE(std::string(e.what()).find("1-2"), std::string::npos);
  }
}

TEST(Predictor, IdealPointReproducesMaxima) {
  for (const Predictor* p : {&gate_failure_predictor(), &hybrid_predictor()}) {
    const auto v = p->predict(ParamVector(std::vector<double>(p->arity(), 1.0)));
    for (std::size_t g = 0; g < v.size(); ++g) EXPECT_NEAR(v[g], p->ideal_values()[g], 1e-9);
  }
  const auto& ideal = gate_failure_predictor().ideal_values();
  EXPECT_NEAR(ideal[0], 16 * std::numbers::sqrt2, 1e-4);
  EXPECT_NEAR(ideal[1], 8 * std::numbers::sqrt2, 1e-4);
  for (std::size_t g = 5; g < 11; ++g) EXPECT_NEAR(ideal[g], 4 * std::numbers::sqrt2, 1e-4);
}

TEST(Predictor, SurrogateMatchesDirectEvaluation) {
  auto g = ts::rng(3);
  for (const char* name : {"gatefailure", "dephasing", "hybrid", "hybrid-depolarizing", "hybrid+global", "gatefailure+global"}) {
    FitConfig cfg = config_for(NoiseModel::from_name(name));
    cfg.search.starts = 4;
    const Predictor p(chain4(), cfg);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> x(p.arity());
      for (auto& v : x) v = std::uniform_real_distribution<double>(0.0, 1.0)(g);
      const auto fast = p.predict(ParamVector(x));
      const auto slow = p.predict_direct(ParamVector(x));
      for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast[i], slow[i], 1e-10) << name;
    }
  }
}

TEST(Predictor, ProductStateNeverViolates) {
  const auto& p = gate_failure_predictor();
  const auto v = p.predict(ParamVector({0, 0, 0}));
  for (std::size_t g = 0; g < v.size(); ++g) EXPECT_LE(v[g], std::ldexp(1.0, static_cast<int>(p.groupings()[g].keep.size())) + 1e-9);
}

TEST(Predictor, ContinuityOnSampledGrid) {
  const auto& p = gate_failure_predictor();
  auto g = ts::rng(4);
  double lipschitz = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(3), b(3);
    for (std::size_t i = 0; i < 3; ++i) {
      a[i] = std::uniform_real_distribution<double>(0.0, 1.0)(g);
      b[i] = std::clamp(a[i] + std::uniform_real_distribution<double>(-0.01, 0.01)(g), 0.0, 1.0);
    }
    const auto va = p.predict(ParamVector(a));
    const auto vb = p.predict(ParamVector(b));
    double dv = 0.0, dp = 0.0;
    for (std::size_t i = 0; i < va.size(); ++i) dv = std::max(dv, std::abs(va[i] - vb[i]));
    for (std::size_t i = 0; i < 3; ++i) dp = std::max(dp, std::abs(a[i] - b[i]));
    if (dp > 0) lipschitz = std::max(lipschitz, dv / dp);
  }
  EXPECT_LT(lipschitz, 200.0);
}

TEST(Predictor, ReoptimizedDominatesFrozen) {
  FitConfig cfg = config_for(NoiseModel::gate_failure());
  cfg.settings_policy = SettingsPolicy::Reoptimized;
  cfg.search.starts = 16;
  const Predictor reopt(chain4(), cfg);
  EXPECT_FALSE(reopt.has_surrogate());
  const ParamVector x({0.9, 0.7, 0.8});
  const auto a = reopt.predict(x);
  const auto b = gate_failure_predictor().predict(x);
  for (std::size_t g = 0; g < a.size(); ++g) EXPECT_GE(a[g], b[g] - 1e-6);
}

TEST(Predictor, PhotonicFrameReachesMaximumWithEquatorialSettings) {
  FitConfig cfg = config_for(NoiseModel::gate_failure());
  cfg.frame = Frame::Photonic;
  cfg.restriction = Restriction::Equatorial;
  cfg.groupings = {make_grouping({0, 1, 2, 3}, 4)};
  const Predictor p(chain4(), cfg);
  EXPECT_NEAR(p.ideal_values()[0], 16 * std::numbers::sqrt2, 1e-4);
  cfg.frame = Frame::Canonical;
  EXPECT_NEAR(Predictor(chain4(), cfg).ideal_values()[0], 16.0, 1e-4);
  cfg.frame = Frame::Photonic;
  EXPECT_THROW(Predictor(Topology::chain(3), cfg), ValidationError);
}

TEST(FitConfig, Validation) {
  FitConfig cfg;
  cfg.grid_resolution = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.grid_resolution = 0.6;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.grid_resolution = 0.02;
  cfg.refine_tolerance = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(GridAxis, EndpointsAndSpacing) {
  const auto a = grid_axis(0.02);
  ASSERT_EQ(a.size(), 51u);
  EXPECT_EQ(a.front(), 0.0);
  EXPECT_EQ(a.back(), 1.0);
  const auto b = grid_axis(0.3);
  EXPECT_EQ(b, (std::vector<double>{0.0, 0.3, 0.6, 0.8999999999999999, 1.0}));
}

TEST(Fit, NoiselessRoundTrip) {
  const auto& p = gate_failure_predictor();
  const auto r = fit(observations_at(p, {0.9, 0.8, 0.7}), p);
  EXPECT_NEAR(r.params[0], 0.9, 1e-3);
  EXPECT_NEAR(r.params[1], 0.8, 1e-3);
  EXPECT_NEAR(r.params[2], 0.7, 1e-3);
  double sum = 0.0;
  for (double x : r.residuals) sum += std::abs(x);
  EXPECT_DOUBLE_EQ(r.objective, sum);
}

TEST(Fit, BoundaryTruthStaysInRange) {
  const auto& p = gate_failure_predictor();
  const auto r = fit(observations_at(p, {1, 1, 1}), p);
  for (double v : r.params.values()) {
    EXPECT_LE(v, 1.0);
    EXPECT_GE(v, 1.0 - 1e-3);
  }
}

TEST(Fit, BeatsEveryCoarseGridPoint) {
  FitConfig cfg = config_for(NoiseModel::gate_failure());
  cfg.grid_resolution = 0.1;
  const Predictor p(chain4(), cfg);
  const auto obs = measured();
  const auto r = fit(obs, p);
  const auto aligned = align_observations(obs, p);
  EXPECT_EQ(r.grid_points, 1331u);
  const auto axis = grid_axis(0.1);
  for (double a : axis)
    for (double b : axis)
      for (double c : axis) {
        EXPECT_LE(r.objective, fit_objective(p.predict_direct(ParamVector({a, b, c})), aligned, false) + 1e-12);
      }
}

TEST(Fit, ObservationOrderDoesNotMatter) {
  const auto& p = gate_failure_predictor();
  auto obs = measured();
  const auto a = fit(obs, p);
  std::reverse(obs.begin(), obs.end());
  const auto b = fit(obs, p);
  EXPECT_EQ(a.params.values(), b.params.values());
}

TEST(Fit, RejectsInconsistentObservations) {
  const auto& p = gate_failure_predictor();
  auto obs = measured();
  auto fewer = obs;
  fewer.pop_back();
  EXPECT_THROW(fit(fewer, p), ValidationError);
  auto dup = obs;
  dup.back() = dup.front();
  EXPECT_THROW(fit(dup, p), ValidationError);
  auto nan = obs;
  nan[3].value = std::nan("");
  EXPECT_THROW(fit(nan, p), ValidationError);
  auto unknown = obs;
  unknown[5].keep = {0, 1, 2};
  unknown[2].keep = {5, 6};
  EXPECT_THROW(fit(unknown, p), ValidationError);
}

TEST(Fit, SigmaWeightedNeedsPositiveSigmas) {
  FitConfig cfg = config_for(NoiseModel::gate_failure());
  cfg.sigma_weighted = true;
  cfg.grid_resolution = 0.1;
  const Predictor p(chain4(), cfg);
  auto obs = measured();
  EXPECT_NO_THROW(fit(obs, p));
  obs[0].sigma = 0.0;
  EXPECT_THROW(fit(obs, p), ValidationError);
}

TEST(Fit, RefinementBudgetExhaustion) {
  FitConfig cfg = config_for(NoiseModel::gate_failure());
  cfg.max_refine_evaluations = 3;
  cfg.grid_resolution = 0.1;
  const Predictor p(chain4(), cfg);
  EXPECT_THROW(fit(measured(), p), ConvergenceError);
}

TEST(Uncertainty, ZeroSigmasAreDegenerate) {
  const auto& p = gate_failure_predictor();
  auto obs = measured();
  for (auto& o : obs) o.sigma = 0.0;
  const auto est = estimate_uncertainty(obs, p, 100, 1);
  EXPECT_EQ(est.stds, (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_TRUE(est.warning.has_value());
  EXPECT_THROW(estimate_uncertainty(obs, p, 99, 1), ValidationError);
}

TEST(Uncertainty, InvariantUnderReorderingAndDeterministic) {
  const auto& p = gate_failure_predictor();
  auto obs = measured();
  const auto a = estimate_uncertainty(obs, p, 100, 7);
  std::rotate(obs.begin(), obs.begin() + 4, obs.end());
  const auto b = estimate_uncertainty(obs, p, 100, 7);
  EXPECT_EQ(a.stds, b.stds);
  EXPECT_NE(a.stds, estimate_uncertainty(obs, p, 100, 8).stds);
}

TEST(Uncertainty, GrowsWithSigma) {
  const auto& p = gate_failure_predictor();
  auto obs = measured();
  auto doubled = obs;
  for (auto& o : doubled) o.sigma *= 2.0;
  double base = 0.0, wide = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (double s : estimate_uncertainty(obs, p, 100, seed).stds) base += s;
    for (double s : estimate_uncertainty(doubled, p, 100, seed).stds) wide += s;
  }
  EXPECT_GT(wide, base);
}

TEST(Uncertainty, MagnitudeComparableToPublished) {
  const auto& p = gate_failure_predictor();
  const auto est = estimate_uncertainty(measured(), p, 1000, 20160917);
  const double published[] = {0.024, 0.010, 0.022};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_GT(est.stds[i], published[i] / 5) << i;
    EXPECT_LT(est.stds[i], published[i] * 5) << i;
  }
}

TEST(Selftest, NoiselessAndBoundary) {
  const auto& p = hybrid_predictor();
  const auto r = synthetic_selftest(p, ParamVector({0.95, 0.7, 0.85}), 0.0, 3);
  EXPECT_LT(r.max_error, 1e-3);
  const auto edge = synthetic_selftest(p, ParamVector({1, 1, 1}), 0.0, 3);
  for (double v : edge.recovered) EXPECT_LE(v, 1.0);
  EXPECT_THROW(synthetic_selftest(p, ParamVector({1, 1, 1}), -1.0, 3), ValidationError);
}

TEST(LinkStrengths, PerModel) {
  const auto top = chain4();
  const auto gf = link_strengths(NoiseModel::gate_failure(), top, ParamVector({0.1, 0.2, 0.3}));
  EXPECT_EQ(gf[2].value, 0.3);
  const auto dp = link_strengths(NoiseModel::qubit_dephasing(), top, ParamVector({0.5, 0.8, 0.9, 0.6}));
  EXPECT_DOUBLE_EQ(dp[0].value, 0.4);
  EXPECT_DOUBLE_EQ(dp[1].value, 0.72);
  EXPECT_DOUBLE_EQ(dp[2].value, 0.54);
  const auto hg = link_strengths(NoiseModel::with_global_depolarizing(NoiseModel::hybrid()), top, ParamVector({0.9, 0.8, 0.7, 0.5}));
  ASSERT_EQ(hg.size(), 3u);
  EXPECT_EQ(hg[1].value, 0.8);
}

TEST(Report, WeakestLinkIsArgmin) {
  const auto& p = gate_failure_predictor();
  auto g = ts::rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(3);
    for (auto& v : x) v = std::uniform_real_distribution<double>(0.6, 1.0)(g);
    const auto r = render_report(fit(observations_at(p, x), p), chain4());
    std::size_t argmin = 0;
    for (std::size_t i = 1; i < r.links.size(); ++i)
      if (r.links[i].value < r.links[argmin].value) argmin = i;
    EXPECT_EQ(r.weakest, argmin);
  }
}

TEST(Report, TiesListedWithLowestIndexFlagged) {
  FitResult fr;
  fr.model = "gatefailure";
  fr.parameter_names = {"p1", "p2", "p3"};
  fr.params = ParamVector({0.9, 0.9, 0.9});
  fr.links = link_strengths(NoiseModel::gate_failure(), chain4(), fr.params);
  const auto r = render_report(fr, chain4());
  EXPECT_EQ(r.weakest, 0u);
  EXPECT_EQ(r.weakest_ties, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_NE(to_text(r).find("weakest (tied)"), std::string::npos);
}

TEST(Report, JsonRoundTripIsLossless) {
  const auto& p = gate_failure_predictor();
  auto fr = fit(measured(), p);
  fr.uncertainties = {0.0123456789012345, 1.0 / 3.0, 2e-17};
  const auto r = render_report(fr, chain4());
  EXPECT_EQ(r.links[2].label, "k_A-k_B");
  const auto text = report_to_json(r).dump();
  const auto back = report_from_json(Json::parse(text));
  EXPECT_EQ(back, r);
  EXPECT_EQ(report_to_json(back).dump(), text);
}

TEST(PlanSearch, ReproducesFrozenDefaults) {
  SearchConfig cfg;
  cfg.starts = 24;
  const std::vector<double> targets = {22.63, 11.31, 11.31, 13.66, 13.66, 5.66, 5.66, 5.66, 5.66, 5.66, 5.66};
  const auto r = search_exclusion_plans(chain4(), targets, 0.02, cfg);
  FitConfig defaults;
  EXPECT_EQ(r.frame, defaults.frame);
  EXPECT_EQ(r.restriction, defaults.restriction);
  EXPECT_EQ(r.groupings, standard_groupings(chain4()));
}
