#pragma once

// Parameterized circuits: the layered RY/RZ + CNOT ansatz, forward
// expectation evaluation, and three gradient paths. Adjoint differentiation
// is the training path; parameter-shift and central finite differences serve
// as oracles for each other and for tests.

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qclus/errors.hpp"
#include "qclus/qsim.hpp"

namespace qclus {

enum class Entangler { Ring, Line };

inline const char* to_string(Entangler e) {
    return e == Entangler::Ring ? "ring" : "line";
}

enum class Encoding { Amplitude, Angle };

inline const char* to_string(Encoding e) {
    return e == Encoding::Amplitude ? "amplitude" : "angle";
}

struct CircuitDescriptor {
    std::size_t n_qubits = 0;
    std::size_t layers = 0;
    std::vector<Gate> gates;
    std::size_t n_params = 0;

    // Checks the slot and target invariants; throws on violation.
    void validate() const {
        if (n_qubits < 1 || n_qubits > QuantumState::kMaxQubits) {
            throw config_error("circuit: qubit count out of range");
        }
        std::vector<char> seen(n_params, 0);
        for (const Gate& g : gates) {
            for (std::size_t t = 0; t < g.n_targets; ++t) {
                if (g.targets[t] >= n_qubits) {
                    throw index_error("circuit: gate target out of range");
                }
            }
            if (g.n_targets == 2 && g.targets[0] == g.targets[1]) {
                throw index_error("circuit: two-qubit gate needs distinct targets");
            }
            if (g.param_slot) {
                if (*g.param_slot >= n_params) {
                    throw index_error("circuit: parameter slot out of range");
                }
                if (seen[*g.param_slot]) {
                    throw contract_error("circuit: parameter slot referenced twice");
                }
                seen[*g.param_slot] = 1;
            }
        }
        for (std::size_t s = 0; s < n_params; ++s) {
            if (!seen[s]) {
                throw contract_error("circuit: parameter slot " + std::to_string(s) +
                                     " unused");
            }
        }
    }
};

// Hardware-efficient ansatz: per layer, RY then RZ on every qubit (each with
// its own parameter slot), then a CNOT entangler. Ring connects j -> j+1 mod
// n (none for n=1); line connects j -> j+1 for j < n-1.
inline CircuitDescriptor build_ansatz(std::size_t n_qubits, std::size_t layers,
                                      Entangler entangle) {
    if (n_qubits < 1 || layers < 1) {
        throw contract_error("build_ansatz: qubit and layer counts must be >= 1");
    }
    if (n_qubits > QuantumState::kMaxQubits) {
        throw config_error("build_ansatz: qubit count exceeds simulator cap");
    }
    CircuitDescriptor c;
    c.n_qubits = n_qubits;
    c.layers = layers;
    c.n_params = 2 * n_qubits * layers;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t base = 2 * n_qubits * l;
        for (std::size_t q = 0; q < n_qubits; ++q) {
            c.gates.push_back(Gate::ry(q, base + q));
        }
        for (std::size_t q = 0; q < n_qubits; ++q) {
            c.gates.push_back(Gate::rz(q, base + n_qubits + q));
        }
        if (n_qubits >= 2) {
            const std::size_t last = entangle == Entangler::Ring ? n_qubits : n_qubits - 1;
            for (std::size_t j = 0; j < last; ++j) {
                c.gates.push_back(Gate::cnot(j, (j + 1) % n_qubits));
            }
        }
    }
    return c;
}

// Draws an initial parameter vector, uniform in [-pi/4, pi/4].
inline std::vector<double> init_params(std::size_t n_params, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-std::acos(-1.0) / 4.0,
                                                std::acos(-1.0) / 4.0);
    std::vector<double> theta(n_params);
    for (double& t : theta) {
        t = dist(rng);
    }
    return theta;
}

namespace detail {

inline void check_expectation_args(const CircuitDescriptor& circuit,
                                   std::span<const double> theta,
                                   const QuantumState& input_state) {
    if (theta.size() != circuit.n_params) {
        throw contract_error("expectation: theta length " +
                             std::to_string(theta.size()) + " != n_params " +
                             std::to_string(circuit.n_params));
    }
    if (input_state.n_qubits() != circuit.n_qubits) {
        throw contract_error("expectation: state has " +
                             std::to_string(input_state.n_qubits()) +
                             " qubits, circuit needs " +
                             std::to_string(circuit.n_qubits));
    }
}

} // namespace detail

// V(theta) applied to the input state.
inline QuantumState run_circuit(const CircuitDescriptor& circuit,
                                std::span<const double> theta,
                                const QuantumState& input_state) {
    detail::check_expectation_args(circuit, theta, input_state);
    QuantumState state = input_state;
    for (const Gate& g : circuit.gates) {
        apply_gate_inplace(state, g, theta);
    }
    return state;
}

// Per-qubit expectations of sigma_axis on V(theta)|input>.
inline std::vector<double> expectation(const CircuitDescriptor& circuit,
                                       std::span<const double> theta,
                                       const QuantumState& input_state,
                                       PauliAxis axis) {
    return pauli_expectation_all(run_circuit(circuit, theta, input_state), axis);
}

// One weighted term of an observable: weight * sigma_axis on one qubit.
struct ObsTerm {
    PauliAxis axis = PauliAxis::Z;
    std::size_t qubit = 0;
    double weight = 1.0;
};

struct AdjointResult {
    double value = 0.0;             // <psi_T| H |psi_T>
    std::vector<double> d_theta;    // dE/d(params), accumulated per slot
    std::vector<cplx> lambda0;      // U'(dagger) H U |psi0>, for input gradients
};

struct GradientReport {
    std::vector<double> d_theta;
    std::vector<double> d_input;
};

namespace detail {

inline cplx raw_inner(std::span<const cplx> a, std::span<const cplx> b) {
    cplx acc{0, 0};
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += std::conj(a[i]) * b[i];
    }
    return acc;
}

inline void apply_gate_raw(std::span<cplx> amps, std::size_t n, const Gate& g,
                           std::span<const double> params, bool inverse) {
    if (g.kind == GateKind::CNOT) {
        apply_cnot_raw(amps, n, g.targets[0], g.targets[1]);
        return;
    }
    double angle = gate_angle(g, params);
    if (inverse) {
        angle = -angle;
    }
    // H is its own inverse and ignores the angle.
    apply_single_raw(amps, n, g.targets[0], single_qubit_matrix(g.kind, angle));
}

} // namespace detail

// Reverse-pass differentiation of E = sum_t weight_t * <sigma_{axis_t}^(qubit_t)>
// over the gate list applied to input_state. One forward sweep, one backward
// sweep; cost O(#gates * 2^n) independent of the parameter count. d_theta has
// params.size() entries; slots referenced by several gates accumulate.
inline AdjointResult adjoint_diff(std::span<const Gate> gates,
                                  std::span<const double> params,
                                  const QuantumState& input_state,
                                  std::span<const ObsTerm> terms) {
    const std::size_t n = input_state.n_qubits();
    const std::size_t dim = input_state.dim();
    for (const ObsTerm& t : terms) {
        if (t.qubit >= n) {
            throw index_error("adjoint_diff: observable qubit out of range");
        }
    }
    for (const Gate& g : gates) {
        for (std::size_t t = 0; t < g.n_targets; ++t) {
            if (g.targets[t] >= n) {
                throw index_error("adjoint_diff: gate target out of range");
            }
        }
        if (is_rotation(g.kind) && !g.param_slot) {
            throw contract_error("adjoint_diff: rotation gate has no parameter slot");
        }
    }

    // Forward sweep.
    std::vector<cplx> psi(input_state.amplitudes().begin(),
                          input_state.amplitudes().end());
    for (const Gate& g : gates) {
        detail::apply_gate_raw(psi, n, g, params, false);
    }

    // lambda = H psi_T
    std::vector<cplx> lambda(dim, cplx{0, 0});
    std::vector<cplx> scratch(dim);
    for (const ObsTerm& t : terms) {
        std::copy(psi.begin(), psi.end(), scratch.begin());
        detail::apply_single_raw(scratch, n, t.qubit, pauli_matrix(t.axis));
        for (std::size_t i = 0; i < dim; ++i) {
            lambda[i] += t.weight * scratch[i];
        }
    }

    AdjointResult out;
    out.value = detail::raw_inner(psi, lambda).real();
    out.d_theta.assign(params.size(), 0.0);

    // Backward sweep: psi walks back to |psi_{t-1}>, lambda picks up G_t
    // adjoints, and each parameterized gate contributes
    // 2 Re <lambda_t | dG_t/dtheta | psi_{t-1}>.
    for (std::size_t idx = gates.size(); idx-- > 0;) {
        const Gate& g = gates[idx];
        detail::apply_gate_raw(psi, n, g, params, true);
        if (g.param_slot) {
            std::copy(psi.begin(), psi.end(), scratch.begin());
            detail::apply_single_raw(
                scratch, n, g.targets[0],
                single_qubit_matrix_derivative(g.kind, gate_angle(g, params)));
            out.d_theta[*g.param_slot] += 2.0 * detail::raw_inner(lambda, scratch).real();
        }
        detail::apply_gate_raw(lambda, n, g, params, true);
    }
    out.lambda0 = std::move(lambda);
    return out;
}

namespace detail {

inline std::vector<ObsTerm> uniform_terms(PauliAxis axis, std::size_t n) {
    std::vector<ObsTerm> terms(n);
    for (std::size_t q = 0; q < n; ++q) {
        terms[q] = ObsTerm{axis, q, 1.0};
    }
    return terms;
}

// Input gradient through the s -> s/||s|| map of amplitude_encode, given
// lambda0 = U'(dagger) H U |u>: dE/ds_j = (2/r) (Re lambda_j - u_j sum_i u_i Re lambda_i).
inline std::vector<double> amplitude_input_grad(std::span<const double> s,
                                                std::span<const cplx> lambda0) {
    double sq = 0.0;
    for (double v : s) {
        sq += v * v;
    }
    const double r = std::sqrt(sq);
    double proj = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        proj += (s[i] / r) * lambda0[i].real();
    }
    std::vector<double> d(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) {
        d[j] = (2.0 / r) * (lambda0[j].real() - (s[j] / r) * proj);
    }
    return d;
}

} // namespace detail

// Gradient of E = sum_t weight_t <sigma_{axis_t}^(qubit_t)> with respect to
// theta and the raw classical input, via one adjoint pass. For angle encoding
// the RY encoding gates are prepended to the circuit and differentiated like
// any other rotation; for amplitude encoding the normalization is
// differentiated analytically from the back-propagated observable.
inline GradientReport grad_adjoint_terms(const CircuitDescriptor& circuit,
                                         std::span<const double> theta,
                                         std::span<const double> input_vector,
                                         Encoding encoding,
                                         std::span<const ObsTerm> terms) {
    if (theta.size() != circuit.n_params) {
        throw contract_error("grad_adjoint: theta length mismatch");
    }
    GradientReport report;

    if (encoding == Encoding::Angle) {
        if (input_vector.size() != circuit.n_qubits) {
            throw contract_error("grad_adjoint: angle encoding needs one input per qubit");
        }
        const std::size_t nz = input_vector.size();
        std::vector<Gate> extended;
        extended.reserve(nz + circuit.gates.size());
        std::vector<double> all_params(input_vector.begin(), input_vector.end());
        all_params.insert(all_params.end(), theta.begin(), theta.end());
        for (std::size_t q = 0; q < nz; ++q) {
            extended.push_back(Gate::ry(q, q));
        }
        for (Gate g : circuit.gates) {
            if (g.param_slot) {
                g.param_slot = *g.param_slot + nz;
            }
            extended.push_back(g);
        }
        auto res = adjoint_diff(extended, all_params, zero_state(circuit.n_qubits), terms);
        report.d_input.assign(res.d_theta.begin(), res.d_theta.begin() + nz);
        report.d_theta.assign(res.d_theta.begin() + nz, res.d_theta.end());
        return report;
    }

    const QuantumState encoded = amplitude_encode(input_vector);
    if (encoded.n_qubits() != circuit.n_qubits) {
        throw contract_error("grad_adjoint: encoded input has " +
                             std::to_string(encoded.n_qubits()) +
                             " qubits, circuit needs " +
                             std::to_string(circuit.n_qubits));
    }
    auto res = adjoint_diff(circuit.gates, theta, encoded, terms);
    report.d_theta = std::move(res.d_theta);
    report.d_input = detail::amplitude_input_grad(input_vector, res.lambda0);
    return report;
}

// Convenience wrapper: the uniform per-qubit sum sum_q <sigma_axis^(q)>.
inline GradientReport grad_adjoint(const CircuitDescriptor& circuit,
                                   std::span<const double> theta,
                                   std::span<const double> input_vector,
                                   Encoding encoding, PauliAxis axis) {
    return grad_adjoint_terms(circuit, theta, input_vector, encoding,
                              detail::uniform_terms(axis, circuit.n_qubits));
}

// Parameter-shift gradient of the single-qubit expectation <sigma_axis^(qubit)>:
// entry j = (E(theta_j + pi/2) - E(theta_j - pi/2)) / 2.
inline std::vector<double> grad_parameter_shift(const CircuitDescriptor& circuit,
                                                std::span<const double> theta,
                                                const QuantumState& input_state,
                                                PauliAxis axis, std::size_t qubit) {
    detail::check_expectation_args(circuit, theta, input_state);
    if (qubit >= circuit.n_qubits) {
        throw index_error("grad_parameter_shift: qubit out of range");
    }
    for (const Gate& g : circuit.gates) {
        if (g.param_slot && !is_rotation(g.kind)) {
            throw unsupported_error("grad_parameter_shift: parameterized gate "
                                    "without a shift rule");
        }
    }
    const double half_pi = std::acos(-1.0) / 2.0;
    std::vector<double> grad(circuit.n_params, 0.0);
    std::vector<double> shifted(theta.begin(), theta.end());
    for (std::size_t j = 0; j < circuit.n_params; ++j) {
        shifted[j] = theta[j] + half_pi;
        const double plus =
            pauli_expectation(run_circuit(circuit, shifted, input_state), axis, qubit);
        shifted[j] = theta[j] - half_pi;
        const double minus =
            pauli_expectation(run_circuit(circuit, shifted, input_state), axis, qubit);
        shifted[j] = theta[j];
        grad[j] = 0.5 * (plus - minus);
    }
    return grad;
}

// Central-difference gradient of E = sum_q <sigma_axis^(q)> over theta and
// every raw input coordinate. Oracle only; O(#params + #inputs) evaluations.
inline GradientReport grad_finite_diff(const CircuitDescriptor& circuit,
                                       std::span<const double> theta,
                                       std::span<const double> input_vector,
                                       Encoding encoding, PauliAxis axis, double h) {
    if (!(h > 0.0) || h > 1e-2) {
        throw contract_error("grad_finite_diff: h must be in (0, 1e-2]");
    }
    auto encode = [&](std::span<const double> v) {
        return encoding == Encoding::Amplitude ? amplitude_encode(v) : angle_encode(v);
    };
    auto total = [&](std::span<const double> th, std::span<const double> in) {
        const auto vals = expectation(circuit, th, encode(in), axis);
        double sum = 0.0;
        for (double v : vals) {
            sum += v;
        }
        return sum;
    };

    GradientReport report;
    std::vector<double> th(theta.begin(), theta.end());
    report.d_theta.resize(th.size());
    for (std::size_t j = 0; j < th.size(); ++j) {
        th[j] = theta[j] + h;
        const double plus = total(th, input_vector);
        th[j] = theta[j] - h;
        const double minus = total(th, input_vector);
        th[j] = theta[j];
        report.d_theta[j] = (plus - minus) / (2.0 * h);
    }

    std::vector<double> in(input_vector.begin(), input_vector.end());
    report.d_input.resize(in.size());
    for (std::size_t j = 0; j < in.size(); ++j) {
        in[j] = input_vector[j] + h;
        const double plus = total(theta, in);
        in[j] = input_vector[j] - h;
        const double minus = total(theta, in);
        in[j] = input_vector[j];
        report.d_input[j] = (plus - minus) / (2.0 * h);
    }
    return report;
}

} // namespace qclus
