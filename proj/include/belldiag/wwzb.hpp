#pragma once

// Two-setting full-correlation Bell functionals
//
//   | sum_s S(s) sum_k prod_j s_j^(k_j - 1) E(k) |  <=  2^N
//
// with s in {-1,+1}^N, k in {1,2}^N. Tensor and sign-function entries are
// stored flat: qubit j is bit (N-1-j) of the index, a set bit meaning
// k_j = 2 (tensor) or s_j = -1 (sign function).

#include "belldiag/quantum.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace belldiag {

enum class Restriction { Equatorial, FullSphere };

std::string to_string(Restriction r);
Restriction restriction_from_string(const std::string& name);

/// Two observables per qubit; entry (j, 0) is setting k_j = 1.
class SettingsTable {
 public:
  explicit SettingsTable(std::vector<std::array<BlochObservable, 2>> entries);

  int n_qubits() const { return static_cast<int>(entries_.size()); }
  const BlochObservable& at(int qubit, int setting) const {
    return entries_[static_cast<std::size_t>(qubit)][static_cast<std::size_t>(setting)];
  }
  const std::vector<std::array<BlochObservable, 2>>& entries() const { return entries_; }

  /// Keeps the rows of the listed qubits, in the order given.
  SettingsTable select(std::span<const int> qubits) const;

 private:
  std::vector<std::array<BlochObservable, 2>> entries_;
};

class CorrelationTensor {
 public:
  CorrelationTensor(int n_qubits, std::vector<double> values);

  int n_qubits() const { return n_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t index) const { return values_[index]; }
  /// Settings given as k_j in {1, 2}.
  double at(std::span<const int> settings) const;
  const std::vector<double>& values() const { return values_; }

  static std::size_t index_of(std::span<const int> settings);

 private:
  int n_;
  std::vector<double> values_;
};

class SignFunction {
 public:
  SignFunction(int n_qubits, std::vector<double> values);

  /// sqrt(2) cos[pi/4 (sum_j s_j - N - 1)], kept as exact reals.
  static SignFunction mabk(int n_qubits);
  static SignFunction constant(int n_qubits, double value);

  int n_qubits() const { return n_; }
  double operator[](std::size_t index) const { return values_[index]; }
  const std::vector<double>& values() const { return values_; }
  bool is_dichotomic(double tolerance = 1e-12) const;

 private:
  int n_;
  std::vector<double> values_;
};

struct WwzbValue {
  double value = 0.0;
  double classical_bound = 0.0;
  int n_qubits = 0;

  bool violates_lhv(double tolerance = 0.0) const { return value > classical_bound + tolerance; }
};

WwzbValue make_wwzb_value(double value, int n_qubits);

CorrelationTensor correlation_tensor(const DensityMatrix& state, const SettingsTable& settings);

/// Literal double sum over s and k.
WwzbValue wwzb_lhs(const CorrelationTensor& correlations, const SignFunction& sign);

/// c_k = sum_s S(s) prod_j s_j^(k_j - 1); the functional is |sum_k c_k E(k)|.
std::vector<double> bell_coefficients(const SignFunction& sign);

/// sum_s | sum_k prod_j s_j^(k_j - 1) E(k) |, the maximum over sign functions.
WwzbValue lhv_max(const CorrelationTensor& correlations);

/// The +-1 sign function attaining lhv_max.
SignFunction lhv_optimal_sign_function(const CorrelationTensor& correlations);

struct SearchConfig {
  int starts = 64;
  std::uint64_t seed = 20160917;
  double angle_tolerance = 1e-7;
  int max_sweeps = 500;
  /// Up to polish_starts of the starts that finish within polish_window of
  /// the best value get polish_sweeps more sweeps; ridges converge slowly.
  int polish_sweeps = 50000;
  int polish_starts = 4;
  double polish_window = 1e-3;
  /// 0 picks BELLDIAG_THREADS or the hardware concurrency.
  int threads = 0;
};

struct SettingsOptimum {
  SettingsTable settings;
  WwzbValue value;
  int start_index = 0;
};

/// Multi-start coordinate ascent over measurement axes; a sweep ends the
/// search once no axis moves by more than angle_tolerance. Leading starts
/// are then continued for up to polish_sweeps.
/// Equatorial axes are (cos phi, sin phi, 0); full-sphere axes use (theta, phi).
SettingsOptimum maximize_settings(const DensityMatrix& state, const SignFunction& sign, Restriction restriction,
                                  const SearchConfig& search);

namespace detail {

/// Correlations for arbitrary single-qubit operators (not necessarily
/// dichotomic), contracted one qubit at a time.
std::vector<double> correlations_for_operators(const CMatrix& rho, int n_qubits,
                                               std::span<const std::array<Matrix2c, 2>> ops);

}  // namespace detail

}  // namespace belldiag
