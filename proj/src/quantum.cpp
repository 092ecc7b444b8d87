#include "belldiag/quantum.hpp"

#include "belldiag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace belldiag {

namespace {

int qubits_for_dim(Eigen::Index dim) {
  if (dim < 1 || (dim & (dim - 1)) != 0) {
    throw DimensionError("dimension " + std::to_string(dim) + " is not a power of two");
  }
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  if (n > kMaxQubits) {
    throw DimensionError("register of " + std::to_string(n) + " qubits exceeds the limit of " +
                         std::to_string(kMaxQubits));
  }
  return n;
}

std::size_t bit_of(int qubit, int n_qubits) { return std::size_t{1} << (n_qubits - 1 - qubit); }

}  // namespace

Matrix2c pauli_combination(const Eigen::Vector3d& a) {
  Matrix2c m;
  m << Complex(a.z(), 0.0), Complex(a.x(), -a.y()),
       Complex(a.x(), a.y()), Complex(-a.z(), 0.0);
  return m;
}

// ---------------------------------------------------------------------------
// BlochObservable

BlochObservable::BlochObservable(const Eigen::Vector3d& axis) : axis_(axis) {
  if (!axis.allFinite() || std::abs(axis.norm() - 1.0) > 1e-12) {
    throw ValidationError("Bloch axis must have unit length");
  }
}

BlochObservable BlochObservable::equatorial(double phi) {
  return BlochObservable({std::cos(phi), std::sin(phi), 0.0});
}

BlochObservable BlochObservable::sphere(double theta, double phi) {
  return BlochObservable({std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)});
}

// ---------------------------------------------------------------------------
// Ket

Ket::Ket(int n_qubits, CVector amplitudes) : n_(n_qubits), amps_(std::move(amplitudes)) {
  if (n_ < 0 || n_ > kMaxQubits) throw DimensionError("qubit count out of range");
  if (static_cast<std::size_t>(amps_.size()) != dim_of(n_)) {
    throw DimensionError("ket length does not match 2^n");
  }
  if (std::abs(amps_.norm() - 1.0) > kStateTolerance) throw ValidationError("ket is not normalized");
}

Ket Ket::basis(int n_qubits, std::size_t index) {
  if (n_qubits < 0 || n_qubits > kMaxQubits) throw DimensionError("qubit count out of range");
  if (index >= dim_of(n_qubits)) throw DimensionError("basis index out of range");
  CVector v = CVector::Zero(static_cast<Eigen::Index>(dim_of(n_qubits)));
  v(static_cast<Eigen::Index>(index)) = 1.0;
  return Ket(n_qubits, std::move(v));
}

DensityMatrix Ket::projector() const { return DensityMatrix::trusted(amps_ * amps_.adjoint()); }

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(CMatrix matrix, Trusted) : m_(std::move(matrix)) {
  if (m_.rows() != m_.cols()) throw DimensionError("density matrix must be square");
  n_ = qubits_for_dim(m_.rows());
  CMatrix h = (m_ + m_.adjoint()) * 0.5;
  m_ = std::move(h);
}

DensityMatrix DensityMatrix::trusted(CMatrix matrix) { return DensityMatrix(std::move(matrix), Trusted{}); }

DensityMatrix::DensityMatrix(CMatrix matrix) : n_(0) {
  if (matrix.rows() != matrix.cols()) throw DimensionError("density matrix must be square");
  n_ = qubits_for_dim(matrix.rows());
  if (!matrix.allFinite()) throw ValidationError("density matrix has non-finite entries");
  const double herm = (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kStateTolerance) throw ValidationError("density matrix is not Hermitian");
  if (std::abs(matrix.trace() - Complex(1.0)) > kStateTolerance) {
    throw ValidationError("density matrix trace differs from 1");
  }
  m_ = (matrix + matrix.adjoint()) * 0.5;
  if (min_eigenvalue() < kPsdFloor) throw ValidationError("density matrix is not positive semidefinite");
}

DensityMatrix DensityMatrix::maximally_mixed(int n_qubits) {
  if (n_qubits < 0 || n_qubits > kMaxQubits) throw DimensionError("qubit count out of range");
  const auto d = static_cast<Eigen::Index>(dim_of(n_qubits));
  return trusted(CMatrix::Identity(d, d) / static_cast<double>(d));
}

double DensityMatrix::purity() const { return (m_ * m_).trace().real(); }

double DensityMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(m_, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

double DensityMatrix::hermiticity_error() const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------
// Unitary and KrausChannel

Unitary::Unitary(CMatrix matrix) : n_(0), m_(std::move(matrix)) {
  if (m_.rows() != m_.cols()) throw DimensionError("unitary must be square");
  n_ = qubits_for_dim(m_.rows());
  const CMatrix err = m_.adjoint() * m_ - CMatrix::Identity(m_.rows(), m_.cols());
  if (err.cwiseAbs().maxCoeff() > kStateTolerance) throw ValidationError("matrix is not unitary");
}

Unitary Unitary::identity(int n_qubits) {
  const auto d = static_cast<Eigen::Index>(dim_of(n_qubits));
  return Unitary(CMatrix::Identity(d, d));
}

Unitary Unitary::cz() {
  CMatrix m = CMatrix::Identity(4, 4);
  m(3, 3) = -1.0;
  return Unitary(std::move(m));
}

Unitary Unitary::hadamard() {
  CMatrix m(2, 2);
  const double s = 1.0 / std::sqrt(2.0);
  m << s, s, s, -s;
  return Unitary(std::move(m));
}

KrausChannel::KrausChannel(std::vector<CMatrix> operators) : n_(0), ops_(std::move(operators)) {
  if (ops_.empty()) throw ValidationError("Kraus channel needs at least one operator");
  const Eigen::Index d = ops_.front().rows();
  CMatrix sum = CMatrix::Zero(d, d);
  for (const auto& k : ops_) {
    if (k.rows() != d || k.cols() != d) throw DimensionError("Kraus operators differ in shape");
    sum += k.adjoint() * k;
  }
  n_ = qubits_for_dim(d);
  if ((sum - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff() > kStateTolerance) {
    throw ValidationError("Kraus channel is not trace preserving");
  }
}

// ---------------------------------------------------------------------------
// Embedding

namespace detail {

void check_targets(std::span<const int> targets, int n_qubits) {
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= n_qubits) {
      throw DimensionError("target qubit " + std::to_string(targets[i]) + " out of range");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (targets[j] == targets[i]) throw DimensionError("repeated target qubit");
    }
  }
}

void apply_left(CMatrix& m, const CMatrix& op, std::span<const int> targets, int n_qubits) {
  const int k = static_cast<int>(targets.size());
  const std::size_t sub = dim_of(k);
  if (static_cast<std::size_t>(op.rows()) != sub || op.cols() != op.rows()) {
    throw DimensionError("operator size does not match target count");
  }
  check_targets(targets, n_qubits);

  std::vector<std::size_t> offsets(sub, 0);
  std::size_t target_mask = 0;
  for (std::size_t a = 0; a < sub; ++a) {
    for (int i = 0; i < k; ++i) {
      if ((a >> (k - 1 - i)) & 1U) offsets[a] |= bit_of(targets[i], n_qubits);
    }
  }
  for (int t : targets) target_mask |= bit_of(t, n_qubits);

  const std::size_t dim = dim_of(n_qubits);
  std::vector<Complex> buf(sub);
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (std::size_t base = 0; base < dim; ++base) {
      if (base & target_mask) continue;
      for (std::size_t a = 0; a < sub; ++a) buf[a] = m(static_cast<Eigen::Index>(base | offsets[a]), c);
      for (std::size_t a = 0; a < sub; ++a) {
        Complex acc = 0.0;
        for (std::size_t b = 0; b < sub; ++b) acc += op(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) * buf[b];
        m(static_cast<Eigen::Index>(base | offsets[a]), c) = acc;
      }
    }
  }
}

CMatrix conjugate(const CMatrix& rho, const CMatrix& op, std::span<const int> targets, int n_qubits) {
  CMatrix a = rho;
  apply_left(a, op, targets, n_qubits);
  CMatrix b = a.adjoint();
  apply_left(b, op, targets, n_qubits);
  return b.adjoint();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Operations

Ket build_plus_state(int n) {
  if (n < 1 || n > kMaxQubits) throw DimensionError("plus state needs 1 <= n <= 12");
  const auto d = static_cast<Eigen::Index>(dim_of(n));
  return Ket(n, CVector::Constant(d, Complex(std::pow(2.0, -0.5 * n), 0.0)));
}

DensityMatrix apply_unitary(const DensityMatrix& state, const Unitary& u, std::span<const int> targets) {
  if (static_cast<std::size_t>(u.n_qubits()) != targets.size()) {
    throw DimensionError("unitary acts on " + std::to_string(u.n_qubits()) + " qubits but " +
                         std::to_string(targets.size()) + " targets were given");
  }
  return DensityMatrix::trusted(detail::conjugate(state.matrix(), u.matrix(), targets, state.n_qubits()));
}

DensityMatrix apply_channel(const DensityMatrix& state, const KrausChannel& channel,
                            std::span<const int> targets) {
  if (static_cast<std::size_t>(channel.n_qubits()) != targets.size()) {
    throw DimensionError("channel acts on " + std::to_string(channel.n_qubits()) + " qubits but " +
                         std::to_string(targets.size()) + " targets were given");
  }
  const auto d = static_cast<Eigen::Index>(state.dim());
  CMatrix out = CMatrix::Zero(d, d);
  for (const auto& k : channel.operators()) {
    out += detail::conjugate(state.matrix(), k, targets, state.n_qubits());
  }
  return DensityMatrix::trusted(std::move(out));
}

double expectation(const DensityMatrix& state, std::span<const BlochObservable> observables) {
  const int n = state.n_qubits();
  if (static_cast<int>(observables.size()) != n) {
    throw DimensionError("expected one observable per qubit");
  }
  CMatrix m = state.matrix();
  for (int q = 0; q < n; ++q) {
    const int target[] = {q};
    detail::apply_left(m, observables[static_cast<std::size_t>(q)].matrix(), target, n);
  }
  return m.trace().real();
}

Projection project_qubit(const DensityMatrix& state, int qubit, const BlochObservable& observable,
                         int outcome) {
  const int n = state.n_qubits();
  if (qubit < 0 || qubit >= n) throw DimensionError("measured qubit out of range");
  if (outcome != 1 && outcome != -1) throw ValidationError("outcome must be +1 or -1");

  const Matrix2c projector = (Matrix2c::Identity() + static_cast<double>(outcome) * observable.matrix()) * 0.5;
  const int target[] = {qubit};
  const CMatrix branch = detail::conjugate(state.matrix(), projector, target, n);
  const double probability = branch.trace().real();
  if (probability < kZeroBranch) {
    throw ZeroProbabilityError("measurement branch on qubit " + std::to_string(qubit) + " has probability " +
                               std::to_string(probability));
  }

  if (n == 1) return {DensityMatrix::trusted(CMatrix::Identity(1, 1)), probability};

  std::vector<int> keep;
  for (int q = 0; q < n; ++q) {
    if (q != qubit) keep.push_back(q);
  }
  DensityMatrix normalized = DensityMatrix::trusted(branch / probability);
  return {partial_trace(normalized, keep), probability};
}

DensityMatrix partial_trace(const DensityMatrix& state, std::span<const int> keep) {
  const int n = state.n_qubits();
  if (keep.empty()) throw DimensionError("partial trace needs at least one kept qubit");
  detail::check_targets(keep, n);
  std::vector<int> kept(keep.begin(), keep.end());
  std::sort(kept.begin(), kept.end());
  std::vector<int> traced;
  for (int q = 0; q < n; ++q) {
    if (!std::binary_search(kept.begin(), kept.end(), q)) traced.push_back(q);
  }

  const int m = static_cast<int>(kept.size());
  const int t = static_cast<int>(traced.size());
  auto scatter = [n](const std::vector<int>& qubits, std::size_t bits) {
    std::size_t idx = 0;
    const int k = static_cast<int>(qubits.size());
    for (int i = 0; i < k; ++i) {
      if ((bits >> (k - 1 - i)) & 1U) idx |= bit_of(qubits[static_cast<std::size_t>(i)], n);
    }
    return idx;
  };

  std::vector<std::size_t> kept_idx(dim_of(m)), traced_idx(dim_of(t));
  for (std::size_t a = 0; a < kept_idx.size(); ++a) kept_idx[a] = scatter(kept, a);
  for (std::size_t a = 0; a < traced_idx.size(); ++a) traced_idx[a] = scatter(traced, a);

  const auto dm = static_cast<Eigen::Index>(dim_of(m));
  CMatrix out = CMatrix::Zero(dm, dm);
  const CMatrix& rho = state.matrix();
  for (Eigen::Index i = 0; i < dm; ++i) {
    for (Eigen::Index j = 0; j < dm; ++j) {
      Complex acc = 0.0;
      for (std::size_t r : traced_idx) {
        acc += rho(static_cast<Eigen::Index>(kept_idx[static_cast<std::size_t>(i)] | r),
                   static_cast<Eigen::Index>(kept_idx[static_cast<std::size_t>(j)] | r));
      }
      out(i, j) = acc;
    }
  }
  return DensityMatrix::trusted(std::move(out));
}

double fidelity(const DensityMatrix& a, const Ket& b) {
  if (a.n_qubits() != b.n_qubits()) throw DimensionError("fidelity arguments differ in size");
  return (b.amplitudes().adjoint() * a.matrix() * b.amplitudes())(0, 0).real();
}

DensityMatrix tensor(const DensityMatrix& a, const DensityMatrix& b) {
  const auto da = a.matrix().rows();
  const auto db = b.matrix().rows();
  CMatrix out(da * db, da * db);
  for (Eigen::Index i = 0; i < da; ++i) {
    for (Eigen::Index j = 0; j < da; ++j) out.block(i * db, j * db, db, db) = a.matrix()(i, j) * b.matrix();
  }
  return DensityMatrix::trusted(std::move(out));
}

}  // namespace belldiag
