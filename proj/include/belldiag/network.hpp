#pragma once

// Cluster-state construction from a network topology and a noise model.
// Qubits are 0-based here; labels and files use 1-based numbering.

#include "belldiag/quantum.hpp"

#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace belldiag {

using Edge = std::pair<int, int>;

enum class PauliAxis { X, Y, Z };
std::string to_string(PauliAxis a);
PauliAxis pauli_axis_from_string(const std::string& s);

struct Topology {
  int n_qubits = 0;
  /// Application order matters for noisy gates.
  std::vector<Edge> edges;
  /// 0-based qubit -> physical name.
  std::map<int, std::string> labels;
  /// Axis along which single-qubit dephasing acts, i.e. the qubit's physical
  /// sigma_z written in the chain frame. Z when absent.
  std::map<int, PauliAxis> dephasing_axes;

  void validate() const;
  std::string label(int qubit) const;
  PauliAxis dephasing_axis(int qubit) const;

  /// 0-1-2-...-(n-1), unlabelled.
  static Topology chain(int n);
  /// The four-qubit chain with labels pi_A, pi_B, k_A, k_B. Polarization and
  /// path sigma_z of pi_A and k_B map to X under canonical_frame_map().
  static Topology photonic_chain4();
};

bool operator==(const Topology& a, const Topology& b);

/// Channel used on links (1,2) and (3,4) by the hybrid model.
enum class HybridLinkChannel { Dephasing, Depolarizing };

/// Shape of the corruption model. Parameter order:
///   GateFailure     one success probability per edge, in edge order
///   QubitDephasing  one coherence probability per qubit
///   Hybrid          (p_1 link (1,2), p_2 link (2,3), p_3 link (3,4))
/// followed by p_g when global_depolarizing is set.
struct NoiseModel {
  enum class Kind { GateFailure, QubitDephasing, Hybrid };

  Kind kind = Kind::GateFailure;
  bool global_depolarizing = false;
  HybridLinkChannel hybrid_link = HybridLinkChannel::Dephasing;

  std::size_t arity(const Topology& top) const;
  std::vector<std::string> parameter_names(const Topology& top) const;
  /// Number of channel applications each parameter controls; the state is a
  /// polynomial of this degree in that parameter.
  std::vector<int> parameter_degrees(const Topology& top) const;
  std::string name() const;

  static NoiseModel gate_failure() { return {Kind::GateFailure, false, HybridLinkChannel::Dephasing}; }
  static NoiseModel qubit_dephasing() { return {Kind::QubitDephasing, false, HybridLinkChannel::Dephasing}; }
  static NoiseModel hybrid() { return {Kind::Hybrid, false, HybridLinkChannel::Dephasing}; }
  static NoiseModel with_global_depolarizing(NoiseModel inner) {
    inner.global_depolarizing = true;
    return inner;
  }
  /// gatefailure | dephasing | hybrid | hybrid+global | ...
  static NoiseModel from_name(const std::string& name);
};

bool operator==(const NoiseModel& a, const NoiseModel& b);

/// Probabilities in [0, 1], one per free model parameter.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

/// p rho + (1-p) Z rho Z
KrausChannel dephasing_channel(double p);
/// p rho + (1-p) A rho A for a Pauli A.
KrausChannel dephasing_channel(double p, PauliAxis axis);
/// p rho + (1-p) I/2
KrausChannel depolarizing_channel(double p);
/// p CZ rho CZ + (1-p) rho
KrausChannel gate_failure_map(double p);

/// Starts from |+>^n and applies the model's gates and channels. Dephasing
/// follows Topology::dephasing_axis.
DensityMatrix build_network_state(const Topology& top, const NoiseModel& model, const ParamVector& params);

/// CZ_{34} CZ_{23} CZ_{12} |++++>
Ket canonical_chain_cluster();

/// The polarization/path cluster: the source state
/// (|HH> + |VV>)(|lr> + |rl>)/2 on (pi_A, pi_B, k_A, k_B) with H, r -> 0 and
/// V, l -> 1, followed by a sign flip on |V l>_A.
Ket build_hyperentangled_cluster();

/// The 24 single-qubit Clifford unitaries, modulo global phase.
std::vector<Matrix2c> single_qubit_cliffords();

/// Exhaustive search for local Cliffords W with (W_0 x ... x W_{n-1})|from>
/// equal to |to> up to a global phase. Throws ValidationError on failure.
std::vector<Matrix2c> search_local_clifford_map(const Ket& from, const Ket& to);

/// Fixed local map W with (x W_j)|hyperentangled cluster> = |canonical chain>.
std::array<Matrix2c, 4> canonical_frame_map();

/// Rotates a canonical-frame four-qubit state into the photonic frame:
/// (x W_j)^dagger rho (x W_j).
DensityMatrix to_photonic_frame(const DensityMatrix& canonical);

}  // namespace belldiag
