#include "belldiag/errors.hpp"
#include "belldiag/network.hpp"
#include "belldiag/wwzb.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace belldiag;
namespace ts = testing_support;

namespace {

const double kSqrt2 = std::numbers::sqrt2;

Ket bell_phi_plus() {
  CVector v = CVector::Zero(4);
  v(0) = v(3) = 1.0 / kSqrt2;
  return Ket(2, v);
}

// For |phi+> E = cos(a + b); these angles make E11 = -E12 = -E21 = -E22 = 1/sqrt2.
SettingsTable chsh_settings() {
  const double pi = std::numbers::pi;
  return SettingsTable({{BlochObservable::equatorial(0.0), BlochObservable::equatorial(pi / 2)},
                        {BlochObservable::equatorial(pi / 4), BlochObservable::equatorial(3 * pi / 4)}});
}

CorrelationTensor random_tensor(int n, std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(std::size_t{1} << n);
  for (auto& x : v) x = u(g);
  return CorrelationTensor(n, v);
}

SignFunction random_sign(int n, std::mt19937_64& g) {
  std::vector<double> v(std::size_t{1} << n);
  for (auto& x : v) x = (g() & 1U) ? 1.0 : -1.0;
  return SignFunction(n, v);
}

}  // namespace

TEST(CorrelationTensor, Examples) {
  auto g = ts::rng(1);
  const auto zero = correlation_tensor(DensityMatrix::maximally_mixed(3), ts::random_settings(3, g));
  for (double e : zero.values()) EXPECT_NEAR(e, 0.0, 1e-12);

  const SettingsTable zz({{BlochObservable::z(), BlochObservable::z()}, {BlochObservable::z(), BlochObservable::z()}});
  const auto ones = correlation_tensor(bell_phi_plus().projector(), zz);
  for (double e : ones.values()) EXPECT_NEAR(e, 1.0, 1e-12);

  const int k12[] = {1, 2};
  EXPECT_EQ(CorrelationTensor::index_of(k12), 1u);
  EXPECT_THROW(CorrelationTensor(2, {1, 0, 0}), DimensionError);
  EXPECT_THROW(CorrelationTensor(1, {1.5, 0}), ValidationError);
  EXPECT_THROW(correlation_tensor(DensityMatrix::maximally_mixed(2), ts::random_settings(3, g)), DimensionError);
}

TEST(CorrelationTensor, MatchesBruteForceOnChainCluster) {
  const DensityMatrix c4 = canonical_chain_cluster().projector();
  const double pi = std::numbers::pi;
  std::vector<std::array<BlochObservable, 2>> rows;
  for (int j = 0; j < 4; ++j) rows.push_back({BlochObservable::equatorial(pi / 4 * j), BlochObservable::equatorial(pi / 2 - pi / 8 * j)});
  const SettingsTable s(rows);
  const auto e = correlation_tensor(c4, s);
  for (std::size_t k = 0; k < 16; ++k) {
    std::vector<CMatrix> ops;
    for (int j = 0; j < 4; ++j) ops.push_back(s.at(j, static_cast<int>((k >> (3 - j)) & 1U)).matrix());
    EXPECT_NEAR(e[k], ts::expectation_oracle(c4.matrix(), ops), 1e-12);
  }
}

TEST(CorrelationTensor, RandomStatesMatchBruteForce) {
  auto g = ts::rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + trial % 5;
    const auto rho = ts::random_state(n, g);
    const auto s = ts::random_settings(n, g);
    const auto e = correlation_tensor(rho, s);
    for (std::size_t k = 0; k < e.size(); ++k) {
      std::vector<CMatrix> ops;
      for (int j = 0; j < n; ++j) ops.push_back(s.at(j, static_cast<int>((k >> (n - 1 - j)) & 1U)).matrix());
      EXPECT_NEAR(e[k], ts::expectation_oracle(rho.matrix(), ops), 1e-12);
    }
  }
}

TEST(SignFunction, MabkValues) {
  const auto s2 = SignFunction::mabk(2);
  EXPECT_DOUBLE_EQ(s2[0], 1.0);  // s = (+1, +1)
  for (int n = 2; n <= 8; ++n) {
    const auto s = SignFunction::mabk(n);
    EXPECT_TRUE(s.is_dichotomic());
    for (std::size_t i = 0; i < s.values().size(); ++i) {
      int sum = 0;
      for (int j = 0; j < n; ++j) sum += ((i >> (n - 1 - j)) & 1U) ? -1 : 1;
      EXPECT_NEAR(s[i], kSqrt2 * std::cos(std::numbers::pi / 4 * (sum - n - 1)), 1e-12);
    }
  }
  const auto s4 = SignFunction::mabk(4);
  EXPECT_EQ(std::count(s4.values().begin(), s4.values().end(), 1.0), 6);
  EXPECT_EQ(std::count(s4.values().begin(), s4.values().end(), -1.0), 10);
  EXPECT_THROW(SignFunction::mabk(1), ValidationError);
}

TEST(WwzbLhs, Examples) {
  auto g = ts::rng(3);
  for (int n = 1; n <= 4; ++n) {
    const CorrelationTensor zero(n, std::vector<double>(std::size_t{1} << n, 0.0));
    EXPECT_EQ(wwzb_lhs(zero, random_sign(n, g)).value, 0.0);
  }
  const auto e = correlation_tensor(bell_phi_plus().projector(), chsh_settings());
  EXPECT_NEAR(wwzb_lhs(e, SignFunction::mabk(2)).value, 4 * kSqrt2, 1e-12);
  EXPECT_NEAR(lhv_max(e).value, 4 * kSqrt2, 1e-12);
  EXPECT_EQ(wwzb_lhs(e, SignFunction::mabk(2)).classical_bound, 4.0);
  EXPECT_THROW(wwzb_lhs(e, SignFunction::mabk(3)), DimensionError);
}

TEST(WwzbLhs, ConstantSignCollapsesToFirstSetting) {
  // With S = 1 only k = (1,...,1) survives: sum_s prod_j s_j^(k_j-1) = 2^N delta.
  auto g = ts::rng(4);
  for (int n = 1; n <= 5; ++n) {
    const auto e = random_tensor(n, g);
    EXPECT_NEAR(wwzb_lhs(e, SignFunction::constant(n, 1.0)).value, std::ldexp(std::abs(e[0]), n), 1e-12);
  }
}

TEST(WwzbLhs, TwoQubitMabkIsChsh) {
  auto g = ts::rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto e = random_tensor(2, g);
    EXPECT_NEAR(wwzb_lhs(e, SignFunction::mabk(2)).value, 2.0 * std::abs(e[0] - e[1] - e[2] - e[3]), 1e-10);
  }
}

TEST(WwzbLhs, MatchesLiteralOracle) {
  auto g = ts::rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 3;
    const auto rho = ts::random_state(n, g);
    const auto s = ts::random_settings(n, g);
    const auto sign = trial % 2 ? SignFunction::mabk(n) : random_sign(n, g);
    EXPECT_NEAR(wwzb_lhs(correlation_tensor(rho, s), sign).value, ts::wwzb_oracle(rho.matrix(), n, s, sign.values()), 1e-11);
  }
}

TEST(LhvMax, Examples) {
  for (int n = 1; n <= 5; ++n) {
    const CorrelationTensor zero(n, std::vector<double>(std::size_t{1} << n, 0.0));
    EXPECT_EQ(lhv_max(zero).value, 0.0);
    const CorrelationTensor ones(n, std::vector<double>(std::size_t{1} << n, 1.0));
    EXPECT_NEAR(lhv_max(ones).value, std::ldexp(1.0, n), 1e-12);
  }
}

TEST(LhvMax, EqualsBruteForceOverAllSignFunctions) {
  auto g = ts::rng(7);
  for (int n : {2, 3}) {
    const std::size_t m = std::size_t{1} << n;
    for (int trial = 0; trial < 30; ++trial) {
      const auto e = random_tensor(n, g);
      double best = 0.0;
      for (std::size_t bits = 0; bits < (std::size_t{1} << m); ++bits) {
        std::vector<double> v(m);
        for (std::size_t s = 0; s < m; ++s) v[s] = ((bits >> s) & 1U) ? -1.0 : 1.0;
        best = std::max(best, wwzb_lhs(e, SignFunction(n, v)).value);
      }
      if (n == 2) {
        EXPECT_EQ(lhv_max(e).value, best);
      }
      EXPECT_NEAR(lhv_max(e).value, best, 1e-12);
      EXPECT_NEAR(wwzb_lhs(e, lhv_optimal_sign_function(e)).value, best, 1e-12);
    }
  }
}

TEST(LhvMax, DominatesEverySignFunction) {
  auto g = ts::rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + trial % 4;
    const auto e = random_tensor(n, g);
    EXPECT_LE(wwzb_lhs(e, random_sign(n, g)).value, lhv_max(e).value + 1e-10);
  }
}

TEST(LhvMax, ProductStatesRespectClassicalBound) {
  auto g = ts::rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 3;
    DensityMatrix rho = ts::random_ket(1, g).projector();
    for (int j = 1; j < n; ++j) rho = tensor(rho, ts::random_ket(1, g).projector());
    EXPECT_LE(lhv_max(correlation_tensor(rho, ts::random_settings(n, g))).value, std::ldexp(1.0, n) + 1e-7);
  }
}

TEST(MaximizeSettings, BellStateBothRestrictions) {
  SearchConfig cfg;
  cfg.starts = 16;
  for (auto r : {Restriction::Equatorial, Restriction::FullSphere}) {
    const auto opt = maximize_settings(bell_phi_plus().projector(), SignFunction::mabk(2), r, cfg);
    EXPECT_NEAR(opt.value.value, 4 * kSqrt2, 1e-6);
    EXPECT_NEAR(wwzb_lhs(correlation_tensor(bell_phi_plus().projector(), opt.settings), SignFunction::mabk(2)).value,
                opt.value.value, 1e-12);
  }
}

TEST(MaximizeSettings, ClusterState) {
  SearchConfig cfg;
  cfg.starts = 32;
  const DensityMatrix c4 = canonical_chain_cluster().projector();
  const auto sign = SignFunction::mabk(4);
  // Equatorial settings on the CZ-chain reach 16; the photonic-frame form of
  // the same state reaches 16 sqrt(2).
  EXPECT_NEAR(maximize_settings(c4, sign, Restriction::Equatorial, cfg).value.value, 16.0, 1e-4);
  EXPECT_NEAR(maximize_settings(c4, sign, Restriction::FullSphere, cfg).value.value, 16 * kSqrt2, 1e-4);
  EXPECT_NEAR(maximize_settings(to_photonic_frame(c4), sign, Restriction::Equatorial, cfg).value.value, 16 * kSqrt2, 1e-4);
}

TEST(MaximizeSettings, MixedStateGivesZero) {
  SearchConfig cfg;
  cfg.starts = 4;
  EXPECT_NEAR(maximize_settings(DensityMatrix::maximally_mixed(3), SignFunction::mabk(3), Restriction::FullSphere, cfg).value.value,
              0.0, 1e-8);
}

TEST(MaximizeSettings, DeterministicAndRejectsEmptyBudget) {
  auto g = ts::rng(10);
  const auto rho = ts::random_state(3, g);
  SearchConfig cfg;
  cfg.starts = 8;
  const auto a = maximize_settings(rho, SignFunction::mabk(3), Restriction::FullSphere, cfg);
  cfg.threads = 1;
  const auto b = maximize_settings(rho, SignFunction::mabk(3), Restriction::FullSphere, cfg);
  EXPECT_EQ(a.value.value, b.value.value);
  EXPECT_EQ(a.start_index, b.start_index);
  cfg.starts = 0;
  EXPECT_THROW(maximize_settings(rho, SignFunction::mabk(3), Restriction::FullSphere, cfg), ValidationError);
}

TEST(MaximizeSettings, InvariantUnderRelabeling) {
  auto g = ts::rng(11);
  SearchConfig cfg;
  cfg.starts = 24;
  for (int trial = 0; trial < 4; ++trial) {
    const auto rho = ts::random_state(3, g, 1);
    // Reverse qubit order.
    CMatrix perm = CMatrix::Zero(8, 8);
    for (std::size_t i = 0; i < 8; ++i) {
      const std::size_t j = ((i & 1U) << 2) | (i & 2U) | ((i >> 2) & 1U);
      perm(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 1.0;
    }
    const DensityMatrix reversed(perm * rho.matrix() * perm.adjoint());
    // The MABK sign function is symmetric in the parties.
    const double a = maximize_settings(rho, SignFunction::mabk(3), Restriction::FullSphere, cfg).value.value;
    const double b = maximize_settings(reversed, SignFunction::mabk(3), Restriction::FullSphere, cfg).value.value;
    EXPECT_NEAR(a, b, 1e-6);
  }
}

TEST(MaximizeSettings, TwoQubitEquatorialMatchesGrid) {
  // Grid over the first party's two angles (721 points each); for fixed first
  // settings the second party's optimum is |u| + |v| in closed form.
  auto g = ts::rng(12);
  const double pi = std::numbers::pi;
  for (int trial = 0; trial < 2; ++trial) {
    const auto rho = ts::random_state(2, g, 1);
    Eigen::Matrix2d t;  // T_ab = <sigma_a x sigma_b>, a, b in {x, y}
    const BlochObservable xy[] = {BlochObservable::x(), BlochObservable::y()};
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const BlochObservable obs[] = {xy[a], xy[b]};
        t(a, b) = expectation(rho, obs);
      }
    // value = |sum_k c_k a_{k1} T b_{k2}| with c = (-2, 2, 2, 2).
    double best = 0.0;
    for (int i = 0; i < 721; ++i) {
      const Eigen::Vector2d a1(std::cos(i * pi / 360), std::sin(i * pi / 360));
      for (int j = 0; j < 721; ++j) {
        const Eigen::Vector2d a2(std::cos(j * pi / 360), std::sin(j * pi / 360));
        const Eigen::Vector2d u = t.transpose() * (-2.0 * a1 + 2.0 * a2);
        const Eigen::Vector2d v = t.transpose() * (2.0 * a1 + 2.0 * a2);
        best = std::max(best, u.norm() + v.norm());
      }
    }
    SearchConfig cfg;
    cfg.starts = 32;
    const double found = maximize_settings(rho, SignFunction::mabk(2), Restriction::Equatorial, cfg).value.value;
    EXPECT_NEAR(found, best, 1e-3);
  }
}
