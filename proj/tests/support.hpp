#pragma once

// Random states and channels plus brute-force reference implementations
// (full Kronecker products, explicit index loops) used as test oracles.

#include "belldiag/quantum.hpp"
#include "belldiag/wwzb.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace testing_support {

using belldiag::CMatrix;
using belldiag::Complex;
using belldiag::CVector;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed * 0x9E3779B97F4A7C15ULL + 7); }

inline CVector random_vector(std::size_t d, std::mt19937_64& g) {
  std::normal_distribution<double> n(0.0, 1.0);
  CVector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = Complex(n(g), n(g));
  return v.normalized();
}

inline belldiag::Ket random_ket(int n, std::mt19937_64& g) {
  return belldiag::Ket(n, random_vector(belldiag::dim_of(n), g));
}

/// Mixture of `rank` random pure states with random weights.
inline belldiag::DensityMatrix random_state(int n, std::mt19937_64& g, int rank = 3) {
  const std::size_t d = belldiag::dim_of(n);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  double total = 0.0;
  for (int r = 0; r < rank; ++r) {
    const double w = u(g);
    const CVector v = random_vector(d, g);
    m += w * v * v.adjoint();
    total += w;
  }
  m /= total;
  return belldiag::DensityMatrix(0.5 * (m + m.adjoint()));
}

inline CMatrix random_unitary(std::size_t d, std::mt19937_64& g) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = Complex(n(g), n(g));
  Eigen::HouseholderQR<CMatrix> qr(a);
  return qr.householderQ();
}

/// Kraus operators from a random isometry d -> d * k.
inline belldiag::KrausChannel random_channel(int n, int k, std::mt19937_64& g) {
  const std::size_t d = belldiag::dim_of(n);
  const CMatrix u = random_unitary(d * static_cast<std::size_t>(k), g);
  std::vector<CMatrix> ops;
  const auto dd = static_cast<Eigen::Index>(d);
  for (int i = 0; i < k; ++i) ops.push_back(u.block(i * dd, 0, dd, dd));
  return belldiag::KrausChannel(ops);
}

inline Eigen::Vector3d random_axis(std::mt19937_64& g) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d a(n(g), n(g), n(g));
  return a.normalized();
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Operator `op` on qubit q of n, identity elsewhere, via full products.
inline CMatrix embed(const CMatrix& op, int q, int n) {
  CMatrix out = CMatrix::Identity(1, 1);
  for (int j = 0; j < n; ++j) out = kron(out, j == q ? op : CMatrix(CMatrix::Identity(2, 2)));
  return out;
}

/// Reduced state by explicit summation over the traced indices.
inline CMatrix partial_trace_oracle(const CMatrix& rho, int n, const std::vector<int>& keep) {
  const int m = static_cast<int>(keep.size());
  const std::size_t dk = std::size_t{1} << m;
  CMatrix out = CMatrix::Zero(static_cast<Eigen::Index>(dk), static_cast<Eigen::Index>(dk));
  const std::size_t d = std::size_t{1} << n;
  auto kept_index = [&](std::size_t i) {
    std::size_t r = 0;
    for (int a = 0; a < m; ++a) r = (r << 1) | ((i >> (n - 1 - keep[static_cast<std::size_t>(a)])) & 1U);
    return r;
  };
  std::size_t kept_mask = 0;
  for (int q : keep) kept_mask |= std::size_t{1} << (n - 1 - q);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if ((i & ~kept_mask) == (j & ~kept_mask))
        out(static_cast<Eigen::Index>(kept_index(i)), static_cast<Eigen::Index>(kept_index(j))) +=
            rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return out;
}

/// Tr(rho x_j A_j) with the full tensor product.
inline double expectation_oracle(const CMatrix& rho, const std::vector<CMatrix>& ops) {
  CMatrix full = CMatrix::Identity(1, 1);
  for (const auto& o : ops) full = kron(full, o);
  return (rho * full).trace().real();
}

/// Functional evaluated from the definition with every correlator computed
/// by full products: |sum_s S(s) sum_k prod_j s_j^(k_j-1) E(k)|.
inline double wwzb_oracle(const CMatrix& rho, int n, const belldiag::SettingsTable& settings,
                          const std::vector<double>& sign) {
  const std::size_t terms = std::size_t{1} << n;
  std::vector<double> e(terms);
  for (std::size_t k = 0; k < terms; ++k) {
    std::vector<CMatrix> ops;
    for (int j = 0; j < n; ++j) ops.push_back(settings.at(j, static_cast<int>((k >> (n - 1 - j)) & 1U)).matrix());
    e[k] = expectation_oracle(rho, ops);
  }
  double total = 0.0;
  for (std::size_t s = 0; s < terms; ++s) {
    double inner = 0.0;
    for (std::size_t k = 0; k < terms; ++k) {
      double ch = 1.0;
      for (int j = 0; j < n; ++j) {
        const bool minus = (s >> (n - 1 - j)) & 1U;
        const bool second = (k >> (n - 1 - j)) & 1U;
        if (minus && second) ch = -ch;
      }
      inner += ch * e[k];
    }
    total += sign[s] * inner;
  }
  return std::abs(total);
}

inline belldiag::SettingsTable random_settings(int n, std::mt19937_64& g) {
  std::vector<std::array<belldiag::BlochObservable, 2>> rows;
  for (int j = 0; j < n; ++j) rows.push_back({belldiag::BlochObservable(random_axis(g)), belldiag::BlochObservable(random_axis(g))});
  return belldiag::SettingsTable(rows);
}

}  // namespace testing_support
