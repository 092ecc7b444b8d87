#include "belldiag/diagnostics.hpp"

#include "belldiag/errors.hpp"
#include "belldiag/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace belldiag {

namespace {

constexpr double kGridTie = 1e-12;
constexpr double kGaugeTolerance = 1e-9;
constexpr double kRestartGain = 1e-12;
constexpr int kMaxRestarts = 50;
// Largest prediction table cached for bootstrap refits (doubles).
constexpr std::size_t kMaxTableEntries = 25'000'000;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string keep_id(const std::vector<int>& keep) {
  std::string out;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(keep[i] + 1);
  }
  return out;
}

// Output of search_exclusion_plans against the published ideal maxima
// (canonical frame, full-sphere settings); excluded qubit (1-based) -> basis.
const std::map<std::string, std::vector<std::pair<int, PauliAxis>>>& default_plans() {
  using P = PauliAxis;
  static const std::map<std::string, std::vector<std::pair<int, PauliAxis>>> plans = {
      {"1-2-3-4", {}},
      {"1-2-4", {{3, P::Z}}},
      {"1-2-3", {{4, P::X}}},
      {"1-3-4", {{2, P::X}}},
      {"2-3-4", {{1, P::Z}}},
      {"1-4", {{2, P::X}, {3, P::X}}},
      {"1-3", {{2, P::X}, {4, P::Z}}},
      {"2-3", {{1, P::Z}, {4, P::Z}}},
      {"2-4", {{1, P::Z}, {3, P::X}}},
      {"1-2", {{3, P::Z}, {4, P::Z}}},
      {"3-4", {{1, P::Z}, {2, P::Z}}},
  };
  return plans;
}

const std::vector<std::vector<int>>& standard_keep_sets() {
  static const std::vector<std::vector<int>> sets = {
      {0, 1, 2, 3}, {0, 1, 3}, {0, 1, 2}, {0, 2, 3}, {1, 2, 3}, {0, 3}, {0, 2}, {1, 2}, {1, 3}, {0, 1}, {2, 3},
  };
  return sets;
}

std::vector<double> lagrange_weights(int nodes, double t) {
  std::vector<double> w(static_cast<std::size_t>(nodes), 1.0);
  if (nodes == 1) return w;
  const double h = 1.0 / (nodes - 1);
  for (int a = 0; a < nodes; ++a) {
    double v = 1.0;
    for (int b = 0; b < nodes; ++b) {
      if (b != a) v *= (t - b * h) / ((a - b) * h);
    }
    w[static_cast<std::size_t>(a)] = v;
  }
  return w;
}

double real_trace_product(const CMatrix& rho, const CMatrix& op) {
  // Tr(rho op) = sum_ij rho_ij op_ji
  return rho.cwiseProduct(op.transpose()).sum().real();
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Bell operator sum_k c_k (x_j A_j(k_j)) on the kept register.
CMatrix bell_operator(const SettingsTable& settings, const SignFunction& sign) {
  const int n = settings.n_qubits();
  const auto coeffs = bell_coefficients(sign);
  const std::size_t d = dim_of(n);
  CMatrix out = CMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    if (coeffs[k] == 0.0) continue;
    CMatrix term = CMatrix::Identity(1, 1);
    for (int j = 0; j < n; ++j) {
      const int setting = static_cast<int>((k >> (n - 1 - j)) & 1U);
      term = kron(term, settings.at(j, setting).matrix());
    }
    out += coeffs[k] * term;
  }
  return out;
}

CMatrix exclusion_projector(const Grouping& g, int n) {
  const std::size_t d = dim_of(n);
  CMatrix p = CMatrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (const auto& ex : g.exclusions) {
    const Matrix2c a = observable_of(ex.basis).matrix();
    const CMatrix proj = 0.5 * (Matrix2c::Identity() + static_cast<double>(ex.outcome) * a);
    const int t[] = {ex.qubit};
    detail::apply_left(p, proj, t, n);
  }
  return p;
}

void check_frame(const Topology& top, Frame frame) {
  if (frame == Frame::Photonic && !(top == Topology::photonic_chain4() || top == Topology::chain(4))) {
    throw ValidationError("photonic frame requires the four-qubit chain");
  }
}

DensityMatrix state_in_frame(const Topology& top, const NoiseModel& model, const ParamVector& p, Frame frame) {
  DensityMatrix rho = build_network_state(top, model, p);
  return frame == Frame::Photonic ? to_photonic_frame(rho) : rho;
}

std::vector<double> clamp01(std::vector<double> x) {
  for (auto& v : x) v = std::clamp(v, 0.0, 1.0);
  return x;
}

struct GridBest {
  std::vector<double> point;
  double objective = std::numeric_limits<double>::infinity();
  std::size_t points = 0;
};

// Visits every grid point in lexicographic order (parameter 0 outermost) and
// hands the predicted values to `visit`.
class GridWalker {
 public:
  GridWalker(const Predictor& predictor, std::vector<double> axis) : predictor_(predictor), axis_(std::move(axis)) {
    k_ = static_cast<int>(predictor.arity());
    if (predictor.has_surrogate()) {
      const auto& s = predictor.surrogate();
      weights_.resize(static_cast<std::size_t>(k_));
      for (int i = 0; i < k_; ++i) {
        for (double t : axis_) weights_[static_cast<std::size_t>(i)].push_back(lagrange_weights(s.nodes_per_param[static_cast<std::size_t>(i)], t));
      }
    }
  }

  std::size_t total() const {
    std::size_t t = 1;
    for (int i = 0; i < k_; ++i) t *= axis_.size();
    return t;
  }

  template <typename F>
  void walk(F&& visit) const {
    std::vector<int> idx(static_cast<std::size_t>(k_), 0);
    if (predictor_.has_surrogate()) {
      const auto& s = predictor_.surrogate();
      const std::size_t outs = 2 * predictor_.size();
      std::vector<std::vector<double>> bufs(static_cast<std::size_t>(k_) + 1);
      bufs[0] = s.values;
      std::vector<std::size_t> combos(static_cast<std::size_t>(k_) + 1);
      combos[0] = s.values.size() / outs;
      for (int i = 0; i < k_; ++i) {
        combos[static_cast<std::size_t>(i) + 1] = combos[static_cast<std::size_t>(i)] / static_cast<std::size_t>(s.nodes_per_param[static_cast<std::size_t>(i)]);
        bufs[static_cast<std::size_t>(i) + 1].assign(combos[static_cast<std::size_t>(i) + 1] * outs, 0.0);
      }
      std::vector<double> pred(predictor_.size());
      surrogate_level(0, idx, bufs, combos, outs, pred, visit);
    } else {
      std::vector<double> p(static_cast<std::size_t>(k_));
      for (std::size_t flat = 0, n = total(); flat < n; ++flat) {
        std::size_t rem = flat;
        for (int i = k_ - 1; i >= 0; --i) {
          idx[static_cast<std::size_t>(i)] = static_cast<int>(rem % axis_.size());
          rem /= axis_.size();
          p[static_cast<std::size_t>(i)] = axis_[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
        }
        const auto pred = predictor_.predict(ParamVector(p));
        visit(idx, pred);
      }
    }
  }

  const std::vector<double>& axis() const { return axis_; }

 private:
  template <typename F>
  void surrogate_level(int level, std::vector<int>& idx, std::vector<std::vector<double>>& bufs,
                       const std::vector<std::size_t>& combos, std::size_t outs, std::vector<double>& pred,
                       F& visit) const {
    if (level == k_) {
      const auto& b = bufs[static_cast<std::size_t>(k_)];
      for (std::size_t g = 0; g < pred.size(); ++g) {
        const double den = b[2 * g + 1];
        if (den <= kZeroBranch) throw ZeroProbabilityError("grouping " + predictor_.groupings()[g].id() + ": exclusion branch has zero probability");
        pred[g] = std::abs(b[2 * g]) / den;
      }
      visit(idx, pred);
      return;
    }
    const auto L = static_cast<std::size_t>(level);
    const auto& src = bufs[L];
    auto& dst = bufs[L + 1];
    const std::size_t rest = combos[L + 1] * outs;
    for (std::size_t gi = 0; gi < axis_.size(); ++gi) {
      const auto& w = weights_[L][gi];
      std::fill(dst.begin(), dst.end(), 0.0);
      for (std::size_t a = 0; a < w.size(); ++a) {
        const double wa = w[a];
        if (wa == 0.0) continue;
        const double* s = src.data() + a * rest;
        for (std::size_t r = 0; r < rest; ++r) dst[r] += wa * s[r];
      }
      idx[L] = static_cast<int>(gi);
      surrogate_level(level + 1, idx, bufs, combos, outs, pred, visit);
    }
  }

  const Predictor& predictor_;
  std::vector<double> axis_;
  int k_ = 0;
  std::vector<std::vector<std::vector<double>>> weights_;
};

std::vector<double> point_of(const std::vector<int>& idx, const std::vector<double>& axis) {
  std::vector<double> p(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) p[i] = axis[static_cast<std::size_t>(idx[i])];
  return p;
}

struct Refined {
  std::vector<double> point;
  double objective = 0.0;
  int evaluations = 0;
};

// One Nelder-Mead pass inside [0,1]^k; trial points are projected onto the box.
template <typename F>
Refined nelder_mead_pass(F&& f, std::vector<double> start, double start_objective, double step, double tolerance,
                         int budget) {
  const std::size_t k = start.size();
  Refined out{start, start_objective, 0};
  if (k == 0) return out;

  auto eval = [&](const std::vector<double>& x) {
    ++out.evaluations;
    return f(x);
  };

  std::vector<std::vector<double>> simplex{start};
  std::vector<double> values{start_objective};
  for (std::size_t i = 0; i < k; ++i) {
    auto v = start;
    v[i] += (v[i] + step <= 1.0) ? step : -step;
    simplex.push_back(v);
    values.push_back(eval(v));
  }

  std::vector<std::size_t> order(k + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<std::vector<double>> s2;
    std::vector<double> v2;
    for (auto o : order) {
      s2.push_back(simplex[o]);
      v2.push_back(values[o]);
    }
    simplex = std::move(s2);
    values = std::move(v2);
  };

  auto diameter = [&] {
    double d = 0.0;
    for (std::size_t i = 1; i <= k; ++i) {
      for (std::size_t j = 0; j < k; ++j) d = std::max(d, std::abs(simplex[i][j] - simplex[0][j]));
    }
    return d;
  };

  sort_simplex();
  while (diameter() > tolerance) {
    if (out.evaluations >= budget) {
      throw ConvergenceError("simplex refinement exceeded " + std::to_string(budget) + " evaluations");
    }
    std::vector<double> centroid(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) centroid[j] += simplex[i][j] / static_cast<double>(k);
    }
    auto along = [&](double t) {
      std::vector<double> x(k);
      for (std::size_t j = 0; j < k; ++j) x[j] = centroid[j] + t * (simplex[k][j] - centroid[j]);
      return clamp01(x);
    };
    const auto xr = along(-1.0);
    const double fr = eval(xr);
    if (fr < values[0]) {
      const auto xe = along(-2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[k] = xe;
        values[k] = fe;
      } else {
        simplex[k] = xr;
        values[k] = fr;
      }
    } else if (fr < values[k - 1]) {
      simplex[k] = xr;
      values[k] = fr;
    } else {
      const bool outside = fr < values[k];
      const auto xc = along(outside ? -0.5 : 0.5);
      const double fc = eval(xc);
      if (fc < (outside ? fr : values[k])) {
        simplex[k] = xc;
        values[k] = fc;
      } else {
        for (std::size_t i = 1; i <= k; ++i) {
          for (std::size_t j = 0; j < k; ++j) simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
          values[i] = eval(simplex[i]);
        }
      }
    }
    sort_simplex();
  }
  if (values[0] < out.objective) {
    out.point = simplex[0];
    out.objective = values[0];
  }
  return out;
}

// Passes restart from the incumbent until one gains less than kRestartGain;
// a simplex flattened against a face of the box recovers its full dimension.
template <typename F>
Refined nelder_mead(F&& f, std::vector<double> start, double start_objective, double step, double tolerance,
                    int budget) {
  Refined out{clamp01(std::move(start)), start_objective, 0};
  for (int pass = 0; pass < kMaxRestarts; ++pass) {
    const auto r = nelder_mead_pass(f, out.point, out.objective, step, tolerance, budget - out.evaluations);
    out.evaluations += r.evaluations;
    const double gain = out.objective - r.objective;
    out.point = r.point;
    out.objective = r.objective;
    if (gain < kRestartGain) break;
  }
  return out;
}

void check_observations(const std::vector<Observation>& aligned, bool sigma_weighted) {
  for (const auto& o : aligned) {
    if (!std::isfinite(o.value) || !std::isfinite(o.sigma)) throw ValidationError("non-finite observation for " + keep_id(o.keep));
    if (o.sigma < 0.0) throw ValidationError("negative sigma for " + keep_id(o.keep));
    if (sigma_weighted && o.sigma <= 0.0) throw ValidationError("sigma-weighted objective needs sigma > 0 for " + keep_id(o.keep));
  }
}

// On the four-chain a dephasing pair (1,2) or (3,4) enters only through
// lambda_1 lambda_2 with lambda = 2p - 1. Fitted points are moved to the
// representative (1, q_12, q_34, 1), q = (1 + lambda lambda') / 2, when the
// predictions confirm the equivalence.
ParamVector dephasing_representative(const ParamVector& params, const Predictor& predictor) {
  const auto& model = predictor.config().model;
  if (model.kind != NoiseModel::Kind::QubitDephasing || predictor.topology().n_qubits != 4) return params;
  std::vector<double> x = params.values();
  const auto pair = [&](std::size_t a, std::size_t b) { return 0.5 * (1.0 + (2.0 * x[a] - 1.0) * (2.0 * x[b] - 1.0)); };
  std::vector<double> y = x;
  y[0] = 1.0;
  y[1] = std::clamp(pair(0, 1), 0.0, 1.0);
  y[2] = std::clamp(pair(2, 3), 0.0, 1.0);
  y[3] = 1.0;
  const ParamVector candidate(y);
  const auto before = predictor.predict(params);
  const auto after = predictor.predict(candidate);
  for (std::size_t g = 0; g < before.size(); ++g) {
    if (std::abs(before[g] - after[g]) > kGaugeTolerance) return params;
  }
  return candidate;
}

// Grid scan plus refinement against fixed observations. `table`, when given,
// holds predictions for every grid point of `walker`.
FitResult run_fit(const std::vector<Observation>& aligned, const Predictor& predictor, const GridWalker& walker,
                  const std::vector<double>* table) {
  const auto& cfg = predictor.config();
  const bool weighted = cfg.sigma_weighted;
  const std::size_t m = predictor.size();

  GridBest best;
  auto consider = [&](const std::vector<int>& idx, std::span<const double> pred) {
    double obj = 0.0;
    for (std::size_t g = 0; g < m; ++g) {
      const double r = std::abs(pred[g] - aligned[g].value);
      obj += weighted ? r / aligned[g].sigma : r;
    }
    ++best.points;
    if (obj < best.objective - kGridTie) {
      best.objective = obj;
      best.point = point_of(idx, walker.axis());
    }
  };

  if (table) {
    const std::size_t k = predictor.arity();
    const std::size_t g = walker.axis().size();
    std::vector<int> idx(k, 0);
    for (std::size_t flat = 0, n = table->size() / m; flat < n; ++flat) {
      std::size_t rem = flat;
      for (std::size_t i = k; i-- > 0;) {
        idx[i] = static_cast<int>(rem % g);
        rem /= g;
      }
      consider(idx, std::span<const double>(table->data() + flat * m, m));
    }
  } else {
    walker.walk(consider);
  }

  auto objective = [&](const std::vector<double>& x) {
    return fit_objective(predictor.predict(ParamVector(x)), aligned, weighted);
  };
  const double step = walker.axis().size() > 1 ? walker.axis()[1] - walker.axis()[0] : 0.5;
  const auto refined = nelder_mead(objective, best.point, best.objective, step, cfg.refine_tolerance,
                                   cfg.max_refine_evaluations);

  FitResult r;
  r.model = cfg.model.name();
  r.parameter_names = cfg.model.parameter_names(predictor.topology());
  r.params = dephasing_representative(ParamVector(refined.point), predictor);
  r.predicted = predictor.predict(r.params);
  for (std::size_t g = 0; g < m; ++g) {
    r.grouping_ids.push_back(predictor.groupings()[g].id());
    r.exclusion_plans.push_back(predictor.groupings()[g].plan());
    r.observed.push_back(aligned[g].value);
    r.sigmas.push_back(aligned[g].sigma);
    r.residuals.push_back(r.predicted[g] - aligned[g].value);
  }
  r.objective = fit_objective(r.predicted, aligned, weighted);
  r.links = link_strengths(cfg.model, predictor.topology(), r.params);
  r.config = cfg;
  r.grid_points = best.points;
  r.refine_evaluations = refined.evaluations;
  return r;
}

}  // namespace

std::string to_string(PauliAxis a) {
  switch (a) {
    case PauliAxis::X: return "X";
    case PauliAxis::Y: return "Y";
    case PauliAxis::Z: return "Z";
  }
  return "?";
}

std::string to_string(SettingsPolicy p) { return p == SettingsPolicy::FrozenIdeal ? "frozen" : "reoptimized"; }

std::string to_string(Frame f) { return f == Frame::Canonical ? "canonical" : "photonic"; }

PauliAxis pauli_axis_from_string(const std::string& s) {
  const auto v = lower(s);
  if (v == "x") return PauliAxis::X;
  if (v == "y") return PauliAxis::Y;
  if (v == "z") return PauliAxis::Z;
  throw ValidationError("unknown basis '" + s + "'");
}

SettingsPolicy settings_policy_from_string(const std::string& s) {
  const auto v = lower(s);
  if (v == "frozen") return SettingsPolicy::FrozenIdeal;
  if (v == "reoptimized") return SettingsPolicy::Reoptimized;
  throw ValidationError("unknown settings policy '" + s + "' (expected frozen|reoptimized)");
}

Frame frame_from_string(const std::string& s) {
  const auto v = lower(s);
  if (v == "canonical") return Frame::Canonical;
  if (v == "photonic") return Frame::Photonic;
  throw ValidationError("unknown frame '" + s + "' (expected canonical|photonic)");
}

BlochObservable observable_of(PauliAxis a) {
  switch (a) {
    case PauliAxis::X: return BlochObservable::x();
    case PauliAxis::Y: return BlochObservable::y();
    case PauliAxis::Z: return BlochObservable::z();
  }
  return BlochObservable::z();
}

std::string Grouping::id() const { return keep_id(keep); }

std::string Grouping::label(const Topology& top) const {
  std::string out = "(";
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (i) out += ", ";
    out += top.label(keep[i]);
  }
  return out + ")";
}

std::string Grouping::plan() const {
  std::string out;
  for (std::size_t i = 0; i < exclusions.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(exclusions[i].qubit + 1) + ':' + to_string(exclusions[i].basis) +
           (exclusions[i].outcome > 0 ? '+' : '-');
  }
  return out.empty() ? "none" : out;
}

void Grouping::validate(int n_qubits) const {
  if (keep.size() < 2) throw ValidationError("grouping must keep at least two qubits");
  if (!std::is_sorted(keep.begin(), keep.end()) || std::adjacent_find(keep.begin(), keep.end()) != keep.end()) {
    throw ValidationError("grouping keep set must be strictly ascending");
  }
  std::set<int> covered(keep.begin(), keep.end());
  for (const auto& ex : exclusions) {
    if (ex.outcome != 1 && ex.outcome != -1) throw ValidationError("exclusion outcome must be +1 or -1");
    if (!covered.insert(ex.qubit).second) throw ValidationError("grouping " + id() + " covers a qubit twice");
  }
  if (keep.front() < 0 || keep.back() >= n_qubits || static_cast<int>(covered.size()) != n_qubits ||
      *covered.begin() < 0 || *covered.rbegin() >= n_qubits) {
    throw ValidationError("grouping " + id() + " does not cover the register exactly");
  }
}

Grouping make_grouping(std::vector<int> keep, int n_qubits, PauliAxis basis) {
  std::sort(keep.begin(), keep.end());
  Grouping g{keep, {}};
  for (int q = 0; q < n_qubits; ++q) {
    if (!std::binary_search(keep.begin(), keep.end(), q)) g.exclusions.push_back({q, basis, 1});
  }
  g.validate(n_qubits);
  return g;
}

std::vector<Grouping> standard_groupings(const Topology& top) {
  top.validate();
  if (top.n_qubits != 4 || !(top == Topology::chain(4) || top == Topology::photonic_chain4())) {
    throw ValidationError("standard groupings exist for the four-qubit chain only; pass explicit groupings");
  }
  std::vector<Grouping> out;
  for (const auto& keep : standard_keep_sets()) {
    Grouping g{keep, {}};
    for (const auto& [q, basis] : default_plans().at(keep_id(keep))) g.exclusions.push_back({q - 1, basis, 1});
    g.validate(4);
    out.push_back(std::move(g));
  }
  return out;
}

DensityMatrix extract_group_state(const DensityMatrix& state, const Grouping& g) {
  g.validate(state.n_qubits());
  std::vector<int> present(static_cast<std::size_t>(state.n_qubits()));
  std::iota(present.begin(), present.end(), 0);
  DensityMatrix cur = state;
  for (const auto& ex : g.exclusions) {
    const auto pos = static_cast<int>(std::find(present.begin(), present.end(), ex.qubit) - present.begin());
    try {
      cur = project_qubit(cur, pos, observable_of(ex.basis), ex.outcome).state;
    } catch (const ZeroProbabilityError& e) {
      throw ZeroProbabilityError("grouping " + g.id() + ": " + e.what());
    }
    present.erase(present.begin() + pos);
  }
  return cur;
}

void FitConfig::validate() const {
  if (!(grid_resolution > 0.0 && grid_resolution <= 0.5)) throw ValidationError("grid resolution must be in (0, 0.5]");
  if (!(bootstrap_grid_resolution > 0.0 && bootstrap_grid_resolution <= 0.5)) {
    throw ValidationError("bootstrap grid resolution must be in (0, 0.5]");
  }
  if (!(refine_tolerance > 0.0)) throw ValidationError("refine tolerance must be positive");
  if (max_refine_evaluations <= 0) throw ValidationError("refinement budget must be positive");
  if (search.starts <= 0 || search.max_sweeps <= 0 || !(search.angle_tolerance > 0.0)) {
    throw ValidationError("settings search budget must be positive");
  }
}

Predictor::Predictor(Topology top, FitConfig config) : top_(std::move(top)), config_(std::move(config)) {
  config_.validate();
  top_.validate();
  check_frame(top_, config_.frame);
  groupings_ = config_.groupings.empty() ? standard_groupings(top_) : config_.groupings;
  std::set<std::string> ids;
  for (const auto& g : groupings_) {
    g.validate(top_.n_qubits);
    if (!ids.insert(g.id()).second) throw ValidationError("duplicate grouping " + g.id());
  }

  const std::size_t k = arity();
  const DensityMatrix ideal = network_state(ParamVector(std::vector<double>(k, 1.0)));
  for (const auto& g : groupings_) {
    signs_.push_back(SignFunction::mabk(static_cast<int>(g.keep.size())));
    const auto opt = maximize_settings(extract_group_state(ideal, g), signs_.back(), config_.restriction, config_.search);
    frozen_.push_back(opt.settings);
    ideal_values_.push_back(opt.value.value);
  }

  if (config_.settings_policy != SettingsPolicy::FrozenIdeal) return;

  const int n = top_.n_qubits;
  for (std::size_t g = 0; g < groupings_.size(); ++g) {
    denominators_.push_back(exclusion_projector(groupings_[g], n));
    CMatrix num = denominators_.back();
    detail::apply_left(num, bell_operator(frozen_[g], signs_[g]), groupings_[g].keep, n);
    numerators_.push_back(std::move(num));
  }

  const auto degrees = config_.model.parameter_degrees(top_);
  std::size_t combos = 1;
  for (int d : degrees) {
    surrogate_.nodes_per_param.push_back(d + 1);
    combos *= static_cast<std::size_t>(d + 1);
  }
  const std::size_t outs = 2 * groupings_.size();
  surrogate_.values.assign(combos * outs, 0.0);
  parallel_for(combos, config_.search.threads, [&](std::size_t c) {
    std::vector<double> p(k);
    std::size_t rem = c;
    for (std::size_t i = k; i-- > 0;) {
      const auto nodes = static_cast<std::size_t>(surrogate_.nodes_per_param[i]);
      p[i] = static_cast<double>(rem % nodes) / static_cast<double>(nodes - 1);
      rem /= nodes;
    }
    const CMatrix rho = network_state(ParamVector(p)).matrix();
    for (std::size_t g = 0; g < groupings_.size(); ++g) {
      surrogate_.values[c * outs + 2 * g] = real_trace_product(rho, numerators_[g]);
      surrogate_.values[c * outs + 2 * g + 1] = real_trace_product(rho, denominators_[g]);
    }
  });
}

DensityMatrix Predictor::network_state(const ParamVector& params) const {
  return state_in_frame(top_, config_.model, params, config_.frame);
}

std::vector<double> Predictor::predict(const ParamVector& params) const {
  if (params.size() != arity()) throw ValidationError("expected " + std::to_string(arity()) + " parameters");
  if (!has_surrogate()) return predict_direct(params);

  std::vector<double> buf = surrogate_.values;
  const std::size_t outs = 2 * groupings_.size();
  std::size_t combos = buf.size() / outs;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const int nodes = surrogate_.nodes_per_param[i];
    const auto w = lagrange_weights(nodes, params[i]);
    const std::size_t rest = combos / static_cast<std::size_t>(nodes) * outs;
    std::vector<double> next(rest, 0.0);
    for (std::size_t a = 0; a < w.size(); ++a) {
      for (std::size_t r = 0; r < rest; ++r) next[r] += w[a] * buf[a * rest + r];
    }
    buf = std::move(next);
    combos /= static_cast<std::size_t>(nodes);
  }
  std::vector<double> out(groupings_.size());
  for (std::size_t g = 0; g < out.size(); ++g) {
    if (buf[2 * g + 1] <= kZeroBranch) {
      throw ZeroProbabilityError("grouping " + groupings_[g].id() + ": exclusion branch has zero probability");
    }
    out[g] = std::abs(buf[2 * g]) / buf[2 * g + 1];
  }
  return out;
}

std::vector<double> Predictor::predict_direct(const ParamVector& params) const {
  if (params.size() != arity()) throw ValidationError("expected " + std::to_string(arity()) + " parameters");
  const DensityMatrix rho = network_state(params);
  std::vector<double> out(groupings_.size());
  for (std::size_t g = 0; g < groupings_.size(); ++g) {
    const DensityMatrix group = extract_group_state(rho, groupings_[g]);
    if (config_.settings_policy == SettingsPolicy::FrozenIdeal) {
      out[g] = wwzb_lhs(correlation_tensor(group, frozen_[g]), signs_[g]).value;
    } else {
      out[g] = maximize_settings(group, signs_[g], config_.restriction, config_.search).value.value;
    }
  }
  return out;
}

std::vector<double> predicted_wwzb(const ParamVector& params, const Topology& top, const FitConfig& config) {
  return Predictor(top, config).predict(params);
}

std::vector<LinkStrength> link_strengths(const NoiseModel& model, const Topology& top, const ParamVector& params) {
  if (params.size() != model.arity(top)) throw ValidationError("parameter count does not match the model");
  std::vector<LinkStrength> out;
  for (std::size_t e = 0; e < top.edges.size(); ++e) {
    const auto [a, b] = top.edges[e];
    double v = 0.0;
    switch (model.kind) {
      case NoiseModel::Kind::GateFailure:
      case NoiseModel::Kind::Hybrid: v = params[e]; break;
      case NoiseModel::Kind::QubitDephasing:
        v = params[static_cast<std::size_t>(a)] * params[static_cast<std::size_t>(b)];
        break;
    }
    out.push_back({top.edges[e], v});
  }
  return out;
}

std::vector<Observation> align_observations(const std::vector<Observation>& obs, const Predictor& predictor) {
  const auto& groups = predictor.groupings();
  if (obs.size() != groups.size()) {
    throw ValidationError("expected " + std::to_string(groups.size()) + " observations, got " + std::to_string(obs.size()));
  }
  std::vector<Observation> aligned(groups.size());
  std::vector<bool> seen(groups.size(), false);
  for (const auto& o : obs) {
    auto keep = o.keep;
    std::sort(keep.begin(), keep.end());
    const auto it = std::find_if(groups.begin(), groups.end(), [&](const Grouping& g) { return g.keep == keep; });
    if (it == groups.end()) throw ValidationError("observation for unknown grouping " + keep_id(keep));
    const auto g = static_cast<std::size_t>(it - groups.begin());
    if (seen[g]) throw ValidationError("duplicate observation for grouping " + keep_id(keep));
    seen[g] = true;
    aligned[g] = o;
    aligned[g].keep = keep;
  }
  return aligned;
}

double fit_objective(const std::vector<double>& predicted, const std::vector<Observation>& aligned, bool sigma_weighted) {
  double obj = 0.0;
  for (std::size_t g = 0; g < predicted.size(); ++g) {
    const double r = std::abs(predicted[g] - aligned[g].value);
    obj += sigma_weighted ? r / aligned[g].sigma : r;
  }
  return obj;
}

std::vector<double> grid_axis(double step) {
  if (!(step > 0.0 && step <= 0.5)) throw ValidationError("grid step must be in (0, 0.5]");
  const auto n = static_cast<int>(std::floor(1.0 / step + 1e-9));
  std::vector<double> axis;
  for (int i = 0; i <= n; ++i) axis.push_back(std::min(1.0, i * step));
  if (1.0 - axis.back() > 1e-12) axis.push_back(1.0);
  axis.back() = 1.0;
  return axis;
}

FitResult fit(const std::vector<Observation>& obs, const Predictor& predictor) {
  const auto aligned = align_observations(obs, predictor);
  check_observations(aligned, predictor.config().sigma_weighted);
  const GridWalker walker(predictor, grid_axis(predictor.config().grid_resolution));
  return run_fit(aligned, predictor, walker, nullptr);
}

FitResult fit(const std::vector<Observation>& obs, const Topology& top, const FitConfig& config) {
  return fit(obs, Predictor(top, config));
}

UncertaintyEstimate estimate_uncertainty(const std::vector<Observation>& obs, const Predictor& predictor,
                                         int n_resamples, std::uint64_t seed) {
  if (n_resamples < 100) throw ValidationError("bootstrap needs at least 100 resamples");
  const auto aligned = align_observations(obs, predictor);
  check_observations(aligned, predictor.config().sigma_weighted);
  const std::size_t k = predictor.arity();
  const std::size_t m = predictor.size();

  UncertaintyEstimate est;
  est.resamples = n_resamples;
  if (std::all_of(aligned.begin(), aligned.end(), [](const Observation& o) { return o.sigma == 0.0; })) {
    est.stds.assign(k, 0.0);
    est.warning = "all sigmas are zero; bootstrap is degenerate";
    return est;
  }

  const GridWalker walker(predictor, grid_axis(predictor.config().bootstrap_grid_resolution));
  std::vector<double> table;
  const bool cache = walker.total() * m <= kMaxTableEntries;
  if (cache) {
    table.reserve(walker.total() * m);
    walker.walk([&](const std::vector<int>&, std::span<const double> pred) { table.insert(table.end(), pred.begin(), pred.end()); });
  }

  std::vector<std::vector<double>> samples(static_cast<std::size_t>(n_resamples));
  parallel_for(samples.size(), predictor.config().search.threads, [&](std::size_t r) {
    auto resampled = aligned;
    for (std::size_t g = 0; g < m; ++g) {
      auto rng = substream(seed, r, g);
      std::normal_distribution<double> noise(0.0, 1.0);
      resampled[g].value = aligned[g].value + aligned[g].sigma * noise(rng);
    }
    samples[r] = run_fit(resampled, predictor, walker, cache ? &table : nullptr).params.values();
  });

  est.stds.assign(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s[i];
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (const auto& s : samples) var += (s[i] - mean) * (s[i] - mean);
    est.stds[i] = std::sqrt(var / static_cast<double>(samples.size() - 1));
  }
  return est;
}

SelftestReport synthetic_selftest(const Predictor& predictor, const ParamVector& true_params, double noise_sigma,
                                  std::uint64_t seed) {
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ValidationError("noise sigma must be finite and >= 0");
  const auto clean = predictor.predict(true_params);
  std::vector<Observation> obs;
  for (std::size_t g = 0; g < clean.size(); ++g) {
    auto rng = substream(seed, g);
    std::normal_distribution<double> noise(0.0, 1.0);
    obs.push_back({predictor.groupings()[g].keep, clean[g] + noise_sigma * noise(rng), noise_sigma});
  }
  const auto result = fit(obs, predictor);

  SelftestReport rep;
  rep.true_params = true_params.values();
  rep.recovered = result.params.values();
  for (std::size_t i = 0; i < rep.true_params.size(); ++i) {
    rep.abs_errors.push_back(std::abs(rep.recovered[i] - rep.true_params[i]));
    rep.max_error = std::max(rep.max_error, rep.abs_errors.back());
    rep.mean_error += rep.abs_errors.back();
  }
  if (!rep.abs_errors.empty()) rep.mean_error /= static_cast<double>(rep.abs_errors.size());
  return rep;
}

std::vector<GroupMaximum> all_mabk_groupwise_maxima(const Topology& top, const FitConfig& config) {
  config.validate();
  check_frame(top, config.frame);
  const auto groups = config.groupings.empty() ? standard_groupings(top) : config.groupings;
  const std::size_t k = config.model.arity(top);
  const DensityMatrix ideal = state_in_frame(top, config.model, ParamVector(std::vector<double>(k, 1.0)), config.frame);
  std::vector<GroupMaximum> out;
  for (const auto& g : groups) {
    const auto sign = SignFunction::mabk(static_cast<int>(g.keep.size()));
    out.push_back({g.id(), maximize_settings(extract_group_state(ideal, g), sign, config.restriction, config.search).value.value});
  }
  return out;
}

PlanSearchResult search_exclusion_plans(const Topology& top, const std::vector<double>& targets, double tolerance,
                                        const SearchConfig& search) {
  const auto& keeps = standard_keep_sets();
  if (targets.size() != keeps.size()) throw ValidationError("expected one target per standard grouping");
  standard_groupings(top);  // topology check

  const DensityMatrix canonical = canonical_chain_cluster().projector();
  PlanSearchResult best;
  bool have = false;
  for (Frame frame : {Frame::Canonical, Frame::Photonic}) {
    const DensityMatrix ideal = frame == Frame::Photonic ? to_photonic_frame(canonical) : canonical;
    for (Restriction restriction : {Restriction::Equatorial, Restriction::FullSphere}) {
      PlanSearchResult cand;
      cand.frame = frame;
      cand.restriction = restriction;
      for (std::size_t i = 0; i < keeps.size(); ++i) {
        const auto sign = SignFunction::mabk(static_cast<int>(keeps[i].size()));
        const Grouping base = make_grouping(keeps[i], 4);
        const std::size_t ex = base.exclusions.size();
        std::optional<Grouping> chosen;
        double chosen_value = 0.0;
        // Bit b of `mask` switches exclusion b from Z to X.
        for (std::size_t mask = 0; mask < (std::size_t{1} << ex); ++mask) {
          Grouping g = base;
          for (std::size_t b = 0; b < ex; ++b) {
            if ((mask >> (ex - 1 - b)) & 1U) g.exclusions[b].basis = PauliAxis::X;
          }
          double v = 0.0;
          try {
            v = maximize_settings(extract_group_state(ideal, g), sign, restriction, search).value.value;
          } catch (const ZeroProbabilityError&) {
            continue;
          }
          if (!chosen || std::abs(v - targets[i]) < std::abs(chosen_value - targets[i]) - 1e-9) {
            chosen = g;
            chosen_value = v;
          }
        }
        if (!chosen) throw ZeroProbabilityError("no admissible exclusion plan for grouping " + base.id());
        cand.groupings.push_back(*chosen);
        cand.values.push_back(chosen_value);
        cand.residuals.push_back(chosen_value - targets[i]);
        if (std::abs(chosen_value - targets[i]) <= tolerance) ++cand.matched;
        cand.total_residual += std::abs(chosen_value - targets[i]);
      }
      const bool better = !have || cand.matched > best.matched ||
                          (cand.matched == best.matched && cand.total_residual < best.total_residual - 1e-9);
      if (better) {
        best = std::move(cand);
        have = true;
      }
    }
  }
  return best;
}

}  // namespace belldiag
