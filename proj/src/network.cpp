#include "belldiag/network.hpp"

#include "belldiag/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace belldiag {

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ValidationError(std::string(what) + " probability " + std::to_string(p) + " outside [0, 1]");
  }
}

Matrix2c pauli(int which) {
  Matrix2c m;
  switch (which) {
    case 0: m << 1, 0, 0, 1; break;
    case 1: m << 0, 1, 1, 0; break;
    case 2: m << 0, Complex(0, -1), Complex(0, 1), 0; break;
    default: m << 1, 0, 0, -1; break;
  }
  return m;
}

bool is_hybrid_chain(const Topology& top) {
  return top.n_qubits == 4 && top.edges == std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Topology

void Topology::validate() const {
  if (n_qubits < 1 || n_qubits > kMaxQubits) throw ValidationError("topology qubit count out of range");
  std::set<Edge> seen;
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n_qubits || b >= n_qubits || a == b) {
      throw ValidationError("edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) + ") is invalid");
    }
    if (!seen.insert({std::min(a, b), std::max(a, b)}).second) {
      throw ValidationError("duplicate edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) + ")");
    }
  }
  for (const auto& [q, name] : labels) {
    if (q < 0 || q >= n_qubits) throw ValidationError("label for qubit " + std::to_string(q + 1) + " out of range");
  }
  for (const auto& [q, axis] : dephasing_axes) {
    if (q < 0 || q >= n_qubits) {
      throw ValidationError("dephasing axis for qubit " + std::to_string(q + 1) + " out of range");
    }
  }
}

PauliAxis Topology::dephasing_axis(int qubit) const {
  auto it = dephasing_axes.find(qubit);
  return it != dephasing_axes.end() ? it->second : PauliAxis::Z;
}

std::string Topology::label(int qubit) const {
  auto it = labels.find(qubit);
  return it != labels.end() ? it->second : std::to_string(qubit + 1);
}

Topology Topology::chain(int n) {
  Topology t;
  t.n_qubits = n;
  for (int i = 0; i + 1 < n; ++i) t.edges.emplace_back(i, i + 1);
  t.validate();
  return t;
}

Topology Topology::photonic_chain4() {
  Topology t = chain(4);
  t.labels = {{0, "pi_A"}, {1, "pi_B"}, {2, "k_A"}, {3, "k_B"}};
  t.dephasing_axes = {{0, PauliAxis::X}, {1, PauliAxis::Z}, {2, PauliAxis::Z}, {3, PauliAxis::X}};
  return t;
}

bool operator==(const Topology& a, const Topology& b) {
  return a.n_qubits == b.n_qubits && a.edges == b.edges && a.labels == b.labels &&
         a.dephasing_axes == b.dephasing_axes;
}

// ---------------------------------------------------------------------------
// NoiseModel

std::size_t NoiseModel::arity(const Topology& top) const {
  std::size_t base = 0;
  switch (kind) {
    case Kind::GateFailure: base = top.edges.size(); break;
    case Kind::QubitDephasing: base = static_cast<std::size_t>(top.n_qubits); break;
    case Kind::Hybrid: base = 3; break;
  }
  return base + (global_depolarizing ? 1 : 0);
}

std::vector<std::string> NoiseModel::parameter_names(const Topology& top) const {
  std::vector<std::string> names;
  const std::size_t base = arity(top) - (global_depolarizing ? 1 : 0);
  for (std::size_t i = 0; i < base; ++i) names.push_back("p" + std::to_string(i + 1));
  if (global_depolarizing) names.emplace_back("p_g");
  return names;
}

std::vector<int> NoiseModel::parameter_degrees(const Topology& top) const {
  std::vector<int> degrees(arity(top), 1);
  if (global_depolarizing) degrees.back() = top.n_qubits;
  return degrees;
}

std::string NoiseModel::name() const {
  std::string base;
  switch (kind) {
    case Kind::GateFailure: base = "gatefailure"; break;
    case Kind::QubitDephasing: base = "dephasing"; break;
    case Kind::Hybrid: base = hybrid_link == HybridLinkChannel::Dephasing ? "hybrid" : "hybrid-depolarizing"; break;
  }
  return global_depolarizing ? base + "+global" : base;
}

NoiseModel NoiseModel::from_name(const std::string& name) {
  std::string base = name;
  bool global = false;
  if (const auto pos = name.find("+global"); pos != std::string::npos && pos + 7 == name.size()) {
    base = name.substr(0, pos);
    global = true;
  }
  NoiseModel m;
  if (base == "gatefailure") {
    m = gate_failure();
  } else if (base == "dephasing") {
    m = qubit_dephasing();
  } else if (base == "hybrid") {
    m = hybrid();
  } else if (base == "hybrid-depolarizing") {
    m = hybrid();
    m.hybrid_link = HybridLinkChannel::Depolarizing;
  } else {
    throw ValidationError("unknown noise model '" + name + "'");
  }
  m.global_depolarizing = global;
  return m;
}

bool operator==(const NoiseModel& a, const NoiseModel& b) {
  return a.kind == b.kind && a.global_depolarizing == b.global_depolarizing && a.hybrid_link == b.hybrid_link;
}

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) check_probability(v, "parameter");
}

// ---------------------------------------------------------------------------
// Channels

KrausChannel dephasing_channel(double p) { return dephasing_channel(p, PauliAxis::Z); }

KrausChannel dephasing_channel(double p, PauliAxis axis) {
  check_probability(p, "dephasing");
  const int which = axis == PauliAxis::X ? 1 : axis == PauliAxis::Y ? 2 : 3;
  return KrausChannel({std::sqrt(p) * CMatrix(pauli(0)), std::sqrt(1.0 - p) * CMatrix(pauli(which))});
}

KrausChannel depolarizing_channel(double p) {
  check_probability(p, "depolarizing");
  const double keep = std::sqrt((1.0 + 3.0 * p) / 4.0);
  const double flip = std::sqrt((1.0 - p) / 4.0);
  return KrausChannel({keep * CMatrix(pauli(0)), flip * CMatrix(pauli(1)), flip * CMatrix(pauli(2)),
                       flip * CMatrix(pauli(3))});
}

KrausChannel gate_failure_map(double p) {
  check_probability(p, "gate success");
  return KrausChannel({std::sqrt(p) * Unitary::cz().matrix(), std::sqrt(1.0 - p) * CMatrix::Identity(4, 4)});
}

// ---------------------------------------------------------------------------
// State construction

DensityMatrix build_network_state(const Topology& top, const NoiseModel& model, const ParamVector& params) {
  top.validate();
  if (params.size() != model.arity(top)) {
    throw ValidationError("model " + model.name() + " takes " + std::to_string(model.arity(top)) +
                          " parameters, got " + std::to_string(params.size()));
  }
  if (model.kind == NoiseModel::Kind::Hybrid && !is_hybrid_chain(top)) {
    throw ValidationError("hybrid model is defined on the four-qubit chain 1-2-3-4");
  }

  DensityMatrix rho = build_plus_state(top.n_qubits).projector();
  const Unitary cz = Unitary::cz();
  switch (model.kind) {
    case NoiseModel::Kind::GateFailure:
      for (std::size_t e = 0; e < top.edges.size(); ++e) {
        const int t[] = {top.edges[e].first, top.edges[e].second};
        rho = apply_channel(rho, gate_failure_map(params[e]), t);
      }
      break;
    case NoiseModel::Kind::QubitDephasing:
      for (auto [a, b] : top.edges) {
        const int t[] = {a, b};
        rho = apply_unitary(rho, cz, t);
      }
      for (int q = 0; q < top.n_qubits; ++q) {
        const int t[] = {q};
        rho = apply_channel(rho, dephasing_channel(params[static_cast<std::size_t>(q)], top.dephasing_axis(q)), t);
      }
      break;
    case NoiseModel::Kind::Hybrid: {
      auto link_noise = [&](double p, int q) {
        return model.hybrid_link == HybridLinkChannel::Dephasing ? dephasing_channel(p, top.dephasing_axis(q))
                                                                 : depolarizing_channel(p);
      };
      for (auto [a, b] : top.edges) {
        const int t[] = {a, b};
        if (a == 1 && b == 2) {
          rho = apply_channel(rho, gate_failure_map(params[1]), t);
        } else {
          rho = apply_unitary(rho, cz, t);
          // Link (1,2) is corrupted on its first qubit, link (3,4) on its last.
          const int noisy[] = {a == 0 ? 0 : 3};
          rho = apply_channel(rho, link_noise(a == 0 ? params[0] : params[2], noisy[0]), noisy);
        }
      }
      break;
    }
  }
  if (model.global_depolarizing) {
    const KrausChannel dep = depolarizing_channel(params[params.size() - 1]);
    for (int q = 0; q < top.n_qubits; ++q) {
      const int t[] = {q};
      rho = apply_channel(rho, dep, t);
    }
  }
  return rho;
}

Ket canonical_chain_cluster() {
  CVector v = build_plus_state(4).amplitudes();
  for (std::size_t i = 0; i < 16; ++i) {
    const int b0 = (i >> 3) & 1, b1 = (i >> 2) & 1, b2 = (i >> 1) & 1, b3 = i & 1;
    const int flips = b0 * b1 + b1 * b2 + b2 * b3;
    if (flips % 2) v(static_cast<Eigen::Index>(i)) *= -1.0;
  }
  return Ket(4, std::move(v));
}

Ket build_hyperentangled_cluster() {
  // Source: (|00> + |11>)_{pi_A pi_B} x (|01> + |10>)_{k_A k_B} / 2.
  CVector v = CVector::Zero(16);
  for (int pol : {0b00, 0b11}) {
    for (int path : {0b01, 0b10}) v(pol << 2 | path) = 0.5;
  }
  // Half-wave plate on mode l of photon A: |V l>_A -> -|V l>_A.
  for (Eigen::Index i = 0; i < 16; ++i) {
    const bool v_a = (i >> 3) & 1;
    const bool l_a = (i >> 1) & 1;
    if (v_a && l_a) v(i) = -v(i);
  }
  return Ket(4, std::move(v));
}

// ---------------------------------------------------------------------------
// Local frames

std::vector<Matrix2c> single_qubit_cliffords() {
  const double s = 1.0 / std::sqrt(2.0);
  Matrix2c h, phase;
  h << s, s, s, -s;
  phase << 1, 0, 0, Complex(0, 1);

  auto canonical = [](const Matrix2c& u) {
    // Remove the global phase using the first entry of largest magnitude.
    Complex ref = 0.0;
    for (int i = 0; i < 4; ++i) {
      if (std::abs(u.data()[i]) > 1e-9) {
        ref = u.data()[i] / std::abs(u.data()[i]);
        break;
      }
    }
    return Matrix2c(u / ref);
  };
  auto same = [](const Matrix2c& a, const Matrix2c& b) { return (a - b).cwiseAbs().maxCoeff() < 1e-9; };

  std::vector<Matrix2c> group{Matrix2c::Identity()};
  for (std::size_t i = 0; i < group.size(); ++i) {
    for (const Matrix2c& g : {h, phase}) {
      const Matrix2c next = canonical(g * group[i]);
      if (std::none_of(group.begin(), group.end(), [&](const Matrix2c& m) { return same(m, next); })) {
        group.push_back(next);
      }
    }
  }
  return group;
}

std::vector<Matrix2c> search_local_clifford_map(const Ket& from, const Ket& to) {
  const int n = from.n_qubits();
  if (to.n_qubits() != n) throw DimensionError("frame search needs states of equal size");
  const auto cliffords = single_qubit_cliffords();
  const std::size_t m = cliffords.size();
  std::vector<std::size_t> choice(static_cast<std::size_t>(n), 0);

  // Depth-first over qubits; partial products are cached per level.
  std::vector<CVector> level(static_cast<std::size_t>(n) + 1);
  level[0] = from.amplitudes();
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  int depth = 0;
  while (depth >= 0) {
    if (idx[static_cast<std::size_t>(depth)] == m) {
      idx[static_cast<std::size_t>(depth)] = 0;
      --depth;
      if (depth >= 0) ++idx[static_cast<std::size_t>(depth)];
      continue;
    }
    CMatrix psi = level[static_cast<std::size_t>(depth)];
    const int target[] = {depth};
    detail::apply_left(psi, cliffords[idx[static_cast<std::size_t>(depth)]], target, n);
    level[static_cast<std::size_t>(depth) + 1] = psi.col(0);
    if (depth + 1 == n) {
      const double f = std::norm(to.amplitudes().dot(level[static_cast<std::size_t>(n)]));
      if (f > 1.0 - 1e-9) {
        std::vector<Matrix2c> out;
        for (int q = 0; q < n; ++q) out.push_back(cliffords[idx[static_cast<std::size_t>(q)]]);
        return out;
      }
      ++idx[static_cast<std::size_t>(depth)];
    } else {
      ++depth;
    }
  }
  throw ValidationError("no local Clifford map relates the two states");
}

std::array<Matrix2c, 4> canonical_frame_map() {
  const double s = 1.0 / std::sqrt(2.0);
  Matrix2c h, id, zh;
  h << s, s, s, -s;
  id = Matrix2c::Identity();
  zh << s, s, -s, s;
  return {h, id, id, zh};
}

DensityMatrix to_photonic_frame(const DensityMatrix& canonical) {
  if (canonical.n_qubits() != 4) throw DimensionError("photonic frame is defined for four qubits");
  CMatrix rho = canonical.matrix();
  const auto w = canonical_frame_map();
  for (int q = 0; q < 4; ++q) {
    const int t[] = {q};
    rho = detail::conjugate(rho, w[static_cast<std::size_t>(q)].adjoint(), t, 4);
  }
  return DensityMatrix::trusted(std::move(rho));
}

}  // namespace belldiag
