#include "belldiag/wwzb.hpp"

#include "belldiag/errors.hpp"
#include "belldiag/parallel.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <algorithm>
#include <numeric>
#include <random>

namespace belldiag {

namespace {

constexpr double kCorrelationSlack = 1e-9;

// prod_j s_j^(k_j - 1) = (-1)^popcount(s & k) with the bit conventions above.
double character(std::size_t s, std::size_t k) {
  return (std::popcount(s & k) & 1U) ? -1.0 : 1.0;
}

void check_size(int n) {
  if (n < 1 || n > kMaxQubits) throw DimensionError("Bell functional needs 1 <= N <= 12");
}

}  // namespace

std::string to_string(Restriction r) { return r == Restriction::Equatorial ? "equatorial" : "fullsphere"; }

Restriction restriction_from_string(const std::string& name) {
  if (name == "equatorial") return Restriction::Equatorial;
  if (name == "fullsphere") return Restriction::FullSphere;
  throw ValidationError("unknown restriction '" + name + "' (expected equatorial|fullsphere)");
}

// ---------------------------------------------------------------------------

SettingsTable::SettingsTable(std::vector<std::array<BlochObservable, 2>> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw DimensionError("settings table needs at least one qubit");
}

SettingsTable SettingsTable::select(std::span<const int> qubits) const {
  std::vector<std::array<BlochObservable, 2>> rows;
  rows.reserve(qubits.size());
  for (int q : qubits) {
    if (q < 0 || q >= n_qubits()) throw DimensionError("settings row out of range");
    rows.push_back(entries_[static_cast<std::size_t>(q)]);
  }
  return SettingsTable(std::move(rows));
}

CorrelationTensor::CorrelationTensor(int n_qubits, std::vector<double> values)
    : n_(n_qubits), values_(std::move(values)) {
  check_size(n_);
  if (values_.size() != dim_of(n_)) throw DimensionError("correlation tensor needs 2^N entries");
  for (double v : values_) {
    if (!std::isfinite(v) || std::abs(v) > 1.0 + kCorrelationSlack) {
      throw ValidationError("correlation entry outside [-1, 1]");
    }
  }
}

std::size_t CorrelationTensor::index_of(std::span<const int> settings) {
  std::size_t idx = 0;
  for (int k : settings) {
    if (k != 1 && k != 2) throw ValidationError("setting index must be 1 or 2");
    idx = (idx << 1) | static_cast<std::size_t>(k - 1);
  }
  return idx;
}

double CorrelationTensor::at(std::span<const int> settings) const {
  if (static_cast<int>(settings.size()) != n_) throw DimensionError("setting tuple length mismatch");
  return values_[index_of(settings)];
}

SignFunction::SignFunction(int n_qubits, std::vector<double> values) : n_(n_qubits), values_(std::move(values)) {
  check_size(n_);
  if (values_.size() != dim_of(n_)) throw DimensionError("sign function needs 2^N entries");
  for (double v : values_) {
    if (!std::isfinite(v)) throw ValidationError("sign function value is not finite");
  }
}

SignFunction SignFunction::mabk(int n_qubits) {
  if (n_qubits < 2) throw ValidationError("MABK sign function needs N >= 2");
  check_size(n_qubits);
  std::vector<double> values(dim_of(n_qubits));
  for (std::size_t s = 0; s < values.size(); ++s) {
    const int minus = std::popcount(s);
    // sum - N - 1 = -2 * minus - 1 is odd, so sqrt(2) cos(pi/4 * m) is +-1
    // and follows m mod 8.
    const int m = ((-2 * minus - 1) % 8 + 8) % 8;
    values[s] = (m == 1 || m == 7) ? 1.0 : -1.0;
  }
  return SignFunction(n_qubits, std::move(values));
}

SignFunction SignFunction::constant(int n_qubits, double value) {
  check_size(n_qubits);
  return SignFunction(n_qubits, std::vector<double>(dim_of(n_qubits), value));
}

bool SignFunction::is_dichotomic(double tolerance) const {
  for (double v : values_) {
    if (std::abs(std::abs(v) - 1.0) > tolerance) return false;
  }
  return true;
}

WwzbValue make_wwzb_value(double value, int n_qubits) {
  return WwzbValue{value, std::ldexp(1.0, n_qubits), n_qubits};
}

// ---------------------------------------------------------------------------

namespace detail {

std::vector<double> correlations_for_operators(const CMatrix& rho, int n_qubits,
                                               std::span<const std::array<Matrix2c, 2>> ops) {
  if (static_cast<int>(ops.size()) != n_qubits) throw DimensionError("one operator pair per qubit required");
  // Layout: [settings prefix][row][col], rows/cols over unprocessed qubits.
  std::size_t prefixes = 1;
  std::size_t side = dim_of(n_qubits);
  std::vector<Complex> cur(side * side);
  for (std::size_t r = 0; r < side; ++r) {
    for (std::size_t c = 0; c < side; ++c) {
      cur[r * side + c] = rho(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  }
  for (int j = 0; j < n_qubits; ++j) {
    const std::size_t half = side / 2;
    std::vector<Complex> next(prefixes * 2 * half * half);
    for (std::size_t p = 0; p < prefixes; ++p) {
      const Complex* block = cur.data() + p * side * side;
      for (int k = 0; k < 2; ++k) {
        const Matrix2c& a = ops[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
        Complex* out = next.data() + (p * 2 + static_cast<std::size_t>(k)) * half * half;
        for (std::size_t r = 0; r < half; ++r) {
          for (std::size_t c = 0; c < half; ++c) {
            // Tr_j(A rho) = sum_{a,b} A(b,a) rho[(a,r),(b,c)]
            Complex acc = 0.0;
            for (std::size_t x = 0; x < 2; ++x) {
              for (std::size_t y = 0; y < 2; ++y) {
                acc += a(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) *
                       block[(x * half + r) * side + (y * half + c)];
              }
            }
            out[r * half + c] = acc;
          }
        }
      }
    }
    cur = std::move(next);
    prefixes *= 2;
    side = half;
  }
  std::vector<double> values(prefixes);
  for (std::size_t i = 0; i < prefixes; ++i) values[i] = cur[i].real();
  return values;
}

}  // namespace detail

CorrelationTensor correlation_tensor(const DensityMatrix& state, const SettingsTable& settings) {
  const int n = state.n_qubits();
  if (settings.n_qubits() != n) throw DimensionError("settings table and state differ in qubit count");
  std::vector<std::array<Matrix2c, 2>> ops;
  ops.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) ops.push_back({settings.at(j, 0).matrix(), settings.at(j, 1).matrix()});
  return CorrelationTensor(n, detail::correlations_for_operators(state.matrix(), n, ops));
}

WwzbValue wwzb_lhs(const CorrelationTensor& correlations, const SignFunction& sign) {
  const int n = correlations.n_qubits();
  if (sign.n_qubits() != n) throw DimensionError("sign function and tensor differ in N");
  const std::size_t d = dim_of(n);
  double total = 0.0;
  for (std::size_t s = 0; s < d; ++s) {
    double inner = 0.0;
    for (std::size_t k = 0; k < d; ++k) inner += character(s, k) * correlations[k];
    total += sign[s] * inner;
  }
  return make_wwzb_value(std::abs(total), n);
}

std::vector<double> bell_coefficients(const SignFunction& sign) {
  const std::size_t d = dim_of(sign.n_qubits());
  std::vector<double> c(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t s = 0; s < d; ++s) c[k] += sign[s] * character(s, k);
  }
  return c;
}

namespace {

std::vector<double> inner_sums(const CorrelationTensor& correlations) {
  const std::size_t d = correlations.size();
  std::vector<double> inner(d, 0.0);
  for (std::size_t s = 0; s < d; ++s) {
    for (std::size_t k = 0; k < d; ++k) inner[s] += character(s, k) * correlations[k];
  }
  return inner;
}

}  // namespace

WwzbValue lhv_max(const CorrelationTensor& correlations) {
  double total = 0.0;
  for (double v : inner_sums(correlations)) total += std::abs(v);
  return make_wwzb_value(total, correlations.n_qubits());
}

SignFunction lhv_optimal_sign_function(const CorrelationTensor& correlations) {
  std::vector<double> values = inner_sums(correlations);
  for (double& v : values) v = v < 0.0 ? -1.0 : 1.0;
  return SignFunction(correlations.n_qubits(), std::move(values));
}

// ---------------------------------------------------------------------------
// Settings search

namespace {

struct Angles {
  double theta;
  double phi;
};

Eigen::Vector3d axis_of(const Angles& a, Restriction r) {
  if (r == Restriction::Equatorial) return {std::cos(a.phi), std::sin(a.phi), 0.0};
  return {std::sin(a.theta) * std::cos(a.phi), std::sin(a.theta) * std::sin(a.phi), std::cos(a.theta)};
}

// The state enters only through T[mu] = Tr(rho sigma_mu1 x ... x sigma_muN)
// with mu_j in {x, y, z}; index mu = sum_j mu_j 3^(N-1-j).
class SettingsObjective {
 public:
  SettingsObjective(const DensityMatrix& state, const SignFunction& sign)
      : n_(state.n_qubits()), coeffs_(bell_coefficients(sign)) {
    const CMatrix& rho = state.matrix();
    std::size_t count = 1;
    for (int j = 0; j < n_; ++j) count *= 3;
    const std::size_t dim = std::size_t{1} << n_;
    tensor_.assign(count, 0.0);
    for (std::size_t mu = 0; mu < count; ++mu) {
      std::size_t flip = 0;
      std::vector<int> digit(static_cast<std::size_t>(n_));
      std::size_t rest = mu;
      for (int j = n_ - 1; j >= 0; --j) {
        digit[static_cast<std::size_t>(j)] = static_cast<int>(rest % 3);
        rest /= 3;
        if (digit[static_cast<std::size_t>(j)] != 2) flip |= std::size_t{1} << (n_ - 1 - j);
      }
      Complex acc = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        Complex phase = 1.0;
        for (int j = 0; j < n_; ++j) {
          const bool bit = (i >> (n_ - 1 - j)) & 1U;
          const int d = digit[static_cast<std::size_t>(j)];
          if (d == 1) phase *= bit ? Complex(0.0, -1.0) : Complex(0.0, 1.0);
          if (d == 2 && bit) phase = -phase;
        }
        acc += rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i ^ flip)) * phase;
      }
      tensor_[mu] = acc.real();
    }
  }

  using Axes = std::vector<std::array<Eigen::Vector3d, 2>>;

  /// Splits the functional into c0 + v.a for the axis a of party j, slot m.
  void coordinate(const Axes& axes, int j, int m, double& c0, Eigen::Vector3d& v) const {
    c0 = 0.0;
    v.setZero();
    const std::size_t terms = coeffs_.size();
    std::vector<int> digit(static_cast<std::size_t>(n_));
    for (std::size_t k = 0; k < terms; ++k) {
      const double c = coeffs_[k];
      if (c == 0.0) continue;
      const int kj = static_cast<int>((k >> (n_ - 1 - j)) & 1U);
      std::fill(digit.begin(), digit.end(), 0);
      for (std::size_t mu = 0; mu < tensor_.size(); ++mu) {
        double prod = tensor_[mu];
        for (int i = 0; i < n_ && prod != 0.0; ++i) {
          if (i == j) continue;
          const auto ki = (k >> (n_ - 1 - i)) & 1U;
          prod *= axes[static_cast<std::size_t>(i)][ki](digit[static_cast<std::size_t>(i)]);
        }
        const int dj = digit[static_cast<std::size_t>(j)];
        if (kj == m) {
          v(dj) += c * prod;
        } else {
          c0 += c * prod * axes[static_cast<std::size_t>(j)][static_cast<std::size_t>(kj)](dj);
        }
        for (int i = n_ - 1; i >= 0; --i) {
          if (++digit[static_cast<std::size_t>(i)] < 3) break;
          digit[static_cast<std::size_t>(i)] = 0;
        }
      }
    }
  }

  int n_qubits() const { return n_; }

 private:
  int n_;
  std::vector<double> coeffs_;
  std::vector<double> tensor_;
};

struct StartResult {
  SettingsObjective::Axes axes;
  double value = -1.0;
};

StartResult random_start(int n, Restriction restriction, std::mt19937_64 rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  StartResult res;
  res.axes.resize(static_cast<std::size_t>(n));
  for (auto& pair : res.axes) {
    for (auto& a : pair) {
      Angles ang;
      ang.phi = 2.0 * std::numbers::pi * uniform(rng);
      ang.theta = restriction == Restriction::FullSphere ? std::acos(1.0 - 2.0 * uniform(rng)) : 0.5 * std::numbers::pi;
      a = axis_of(ang, restriction);
    }
  }
  return res;
}

// The functional is affine in every single setting: with the others fixed it
// equals c0 + v.a, so each coordinate step jumps to the exact optimum.
void ascend(const SettingsObjective& obj, Restriction restriction, double tolerance, int sweeps, StartResult& res) {
  const int n = obj.n_qubits();
  double c0 = 0.0;
  Eigen::Vector3d v;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    double moved = 0.0;
    for (int j = 0; j < n; ++j) {
      for (int m = 0; m < 2; ++m) {
        auto& axis = res.axes[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)];
        obj.coordinate(res.axes, j, m, c0, v);
        // |c0 + v.a| peaks at a = sign(c0) v / |v|, projected to the plane
        // for equatorial settings.
        if (restriction == Restriction::Equatorial) v(2) = 0.0;
        const double norm = v.norm();
        if (norm > 1e-300) {
          const Eigen::Vector3d a = (c0 < 0.0 ? -1.0 : 1.0) * v / norm;
          moved = std::max(moved, (a - axis).norm());
          axis = a;
        }
      }
    }
    if (moved < tolerance) break;
  }
  obj.coordinate(res.axes, 0, 0, c0, v);
  res.value = std::abs(c0 + v.dot(res.axes[0][0]));
}

}  // namespace

SettingsOptimum maximize_settings(const DensityMatrix& state, const SignFunction& sign, Restriction restriction,
                                  const SearchConfig& search) {
  if (search.starts <= 0 || search.max_sweeps <= 0 || search.polish_sweeps < 0 ||
      search.polish_starts < 0) throw ValidationError("settings search budget is zero");
  if (!(search.angle_tolerance > 0.0)) throw ValidationError("angle tolerance must be positive");
  if (sign.n_qubits() != state.n_qubits()) throw DimensionError("sign function and state differ in qubit count");

  const SettingsObjective obj(state, sign);
  std::vector<StartResult> results(static_cast<std::size_t>(search.starts));
  parallel_for(results.size(), search.threads, [&](std::size_t i) {
    results[i] = random_start(state.n_qubits(), restriction, substream(search.seed, i));
    ascend(obj, restriction, search.angle_tolerance, search.max_sweeps, results[i]);
  });

  std::vector<std::size_t> order(results.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return results[x].value > results[y].value; });
  std::vector<std::size_t> leaders;
  for (std::size_t i : order) {
    if (leaders.size() >= static_cast<std::size_t>(search.polish_starts)) break;
    if (results[i].value >= results[order[0]].value - search.polish_window) leaders.push_back(i);
  }
  if (search.polish_sweeps > 0) {
    parallel_for(leaders.size(), search.threads, [&](std::size_t i) {
      ascend(obj, restriction, search.angle_tolerance, search.polish_sweeps, results[leaders[i]]);
    });
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].value > results[best].value) best = i;
  }
  std::vector<std::array<BlochObservable, 2>> rows;
  for (const auto& pair : results[best].axes) {
    rows.push_back({BlochObservable(pair[0]), BlochObservable(pair[1])});
  }
  SettingsTable table(std::move(rows));
  // Report the value of the returned (normalized) settings.
  const double value = wwzb_lhs(correlation_tensor(state, table), sign).value;
  return SettingsOptimum{std::move(table), make_wwzb_value(value, state.n_qubits()), static_cast<int>(best)};
}

}  // namespace belldiag
