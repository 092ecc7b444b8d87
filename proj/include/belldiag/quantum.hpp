#pragma once

// Dense n-qubit state algebra. Qubit 0 is the most significant bit of the
// computational-basis index, so |q0 q1 ... q(n-1)> reads left to right.

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace belldiag {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Matrix2c = Eigen::Matrix2cd;

inline constexpr int kMaxQubits = 12;

inline constexpr double kStateTolerance = 1e-10;
inline constexpr double kPsdFloor = -1e-9;
inline constexpr double kZeroBranch = 1e-12;

inline std::size_t dim_of(int n_qubits) { return std::size_t{1} << n_qubits; }

/// Real vector a -> a.sigma. Used both for unit-axis observables and, in the
/// setting optimizer, for the affine decomposition along a single axis.
Matrix2c pauli_combination(const Eigen::Vector3d& a);

/// A dichotomic single-qubit observable n.sigma with |n| = 1.
class BlochObservable {
 public:
  explicit BlochObservable(const Eigen::Vector3d& axis);

  static BlochObservable x() { return BlochObservable({1.0, 0.0, 0.0}); }
  static BlochObservable y() { return BlochObservable({0.0, 1.0, 0.0}); }
  static BlochObservable z() { return BlochObservable({0.0, 0.0, 1.0}); }
  /// (cos phi, sin phi, 0)
  static BlochObservable equatorial(double phi);
  /// (sin theta cos phi, sin theta sin phi, cos theta)
  static BlochObservable sphere(double theta, double phi);

  const Eigen::Vector3d& axis() const { return axis_; }
  Matrix2c matrix() const { return pauli_combination(axis_); }

 private:
  Eigen::Vector3d axis_;
};

class DensityMatrix;

/// Normalized pure state on n qubits.
class Ket {
 public:
  Ket(int n_qubits, CVector amplitudes);

  static Ket basis(int n_qubits, std::size_t index);

  int n_qubits() const { return n_; }
  std::size_t dim() const { return dim_of(n_); }
  const CVector& amplitudes() const { return amps_; }
  Complex amplitude(std::size_t index) const { return amps_(static_cast<Eigen::Index>(index)); }

  DensityMatrix projector() const;

 private:
  int n_;
  CVector amps_;
};

/// Hermitian, unit-trace, positive semidefinite operator on n qubits. A
/// zero-qubit register (the scalar 1) is allowed as the remainder of a
/// measurement that consumed every qubit.
class DensityMatrix {
 public:
  /// Validates Hermiticity, trace and the eigenvalue floor.
  explicit DensityMatrix(CMatrix matrix);

  static DensityMatrix maximally_mixed(int n_qubits);

  int n_qubits() const { return n_; }
  std::size_t dim() const { return dim_of(n_); }
  const CMatrix& matrix() const { return m_; }

  double trace() const { return m_.trace().real(); }
  double purity() const;
  double min_eigenvalue() const;
  /// Largest |m - m^dagger| entry.
  double hermiticity_error() const;

  /// Builds from a matrix known to be a state up to rounding. Hermitizes
  /// and checks shape only; used by the algebra in this library.
  static DensityMatrix trusted(CMatrix matrix);

 private:
  struct Trusted {};
  DensityMatrix(CMatrix matrix, Trusted);

  int n_;
  CMatrix m_;
};

class Unitary {
 public:
  explicit Unitary(CMatrix matrix);

  static Unitary identity(int n_qubits);
  /// Controlled-phase: diag(1, 1, 1, -1).
  static Unitary cz();
  static Unitary hadamard();

  int n_qubits() const { return n_; }
  const CMatrix& matrix() const { return m_; }
  Unitary adjoint() const { return Unitary(m_.adjoint()); }

 private:
  int n_;
  CMatrix m_;
};

/// Trace-preserving Kraus representation, sum_k K_k^dagger K_k = I.
class KrausChannel {
 public:
  explicit KrausChannel(std::vector<CMatrix> operators);

  int n_qubits() const { return n_; }
  const std::vector<CMatrix>& operators() const { return ops_; }

 private:
  int n_;
  std::vector<CMatrix> ops_;
};

struct Projection {
  DensityMatrix state;
  double probability;
};

Ket build_plus_state(int n);

DensityMatrix apply_unitary(const DensityMatrix& state, const Unitary& u, std::span<const int> targets);
DensityMatrix apply_channel(const DensityMatrix& state, const KrausChannel& channel,
                            std::span<const int> targets);

/// Tr(rho (A_0 x A_1 x ...)), one observable per qubit.
double expectation(const DensityMatrix& state, std::span<const BlochObservable> observables);

/// Measures `qubit` along `observable`, keeps the branch with eigenvalue
/// `outcome` (+1 or -1), and removes the qubit from the register.
Projection project_qubit(const DensityMatrix& state, int qubit, const BlochObservable& observable,
                         int outcome);

/// Reduced state on `keep` (ascending qubit order in the result).
DensityMatrix partial_trace(const DensityMatrix& state, std::span<const int> keep);

/// <b| a |b>
double fidelity(const DensityMatrix& a, const Ket& b);

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b);

namespace detail {

/// m <- op_embedded * m, with op acting on `targets` of an n-qubit register.
void apply_left(CMatrix& m, const CMatrix& op, std::span<const int> targets, int n_qubits);

/// op rho op^dagger for a single operator embedded on targets.
CMatrix conjugate(const CMatrix& rho, const CMatrix& op, std::span<const int> targets, int n_qubits);

void check_targets(std::span<const int> targets, int n_qubits);

}  // namespace detail

}  // namespace belldiag
