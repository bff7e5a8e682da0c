#pragma once

// Dense statevector simulation: states, the {RX, RY, RZ, H, CNOT} gate set,
// classical-to-quantum encodings, and Pauli readout.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qclus/errors.hpp"
#include "qclus/util.hpp"

namespace qclus {

using cplx = std::complex<double>;

enum class PauliAxis { X, Y, Z };

inline const char* to_string(PauliAxis axis) {
    switch (axis) {
    case PauliAxis::X: return "X";
    case PauliAxis::Y: return "Y";
    default: return "Z";
    }
}

// 2x2 Pauli matrix, row-major.
inline std::array<cplx, 4> pauli_matrix(PauliAxis axis) {
    switch (axis) {
    case PauliAxis::X:
        return {cplx{0, 0}, cplx{1, 0}, cplx{1, 0}, cplx{0, 0}};
    case PauliAxis::Y:
        return {cplx{0, 0}, cplx{0, -1}, cplx{0, 1}, cplx{0, 0}};
    default:
        return {cplx{1, 0}, cplx{0, 0}, cplx{0, 0}, cplx{-1, 0}};
    }
}

namespace detail {

// Kernels on raw amplitude buffers. Callers validate indices; these assume
// amps.size() == 2^n_qubits and qubit < n_qubits. Used both by QuantumState
// and by the adjoint engine, whose intermediate vectors are not unit norm.
inline void apply_single_raw(std::span<cplx> amps, std::size_t n_qubits,
                             std::size_t qubit, const std::array<cplx, 4>& m) {
    const std::size_t stride = std::size_t{1} << (n_qubits - 1 - qubit);
    const std::size_t dim = amps.size();
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t off = 0; off < stride; ++off) {
            const std::size_t i0 = base + off;
            const std::size_t i1 = i0 + stride;
            const cplx a0 = amps[i0];
            const cplx a1 = amps[i1];
            amps[i0] = m[0] * a0 + m[1] * a1;
            amps[i1] = m[2] * a0 + m[3] * a1;
        }
    }
}

inline void apply_cnot_raw(std::span<cplx> amps, std::size_t n_qubits,
                           std::size_t control, std::size_t target) {
    const std::size_t cmask = std::size_t{1} << (n_qubits - 1 - control);
    const std::size_t tmask = std::size_t{1} << (n_qubits - 1 - target);
    for (std::size_t i = 0; i < amps.size(); ++i) {
        if ((i & cmask) && !(i & tmask)) {
            std::swap(amps[i], amps[i | tmask]);
        }
    }
}

} // namespace detail

// Pure n-qubit state as 2^n complex amplitudes. Qubit 0 is the most
// significant bit of the amplitude index, i.e. the amplitude of
// |q0 q1 ... q(n-1)> sits at index q0*2^(n-1) + q1*2^(n-2) + ... + q(n-1).
class QuantumState {
public:
    static constexpr std::size_t kMaxQubits = 12;

    explicit QuantumState(std::size_t n_qubits)
        : n_qubits_(checked_qubits(n_qubits)), amps_(std::size_t{1} << n_qubits) {
        amps_[0] = cplx{1, 0};
    }

    QuantumState(std::size_t n_qubits, std::vector<cplx> amplitudes)
        : n_qubits_(checked_qubits(n_qubits)), amps_(std::move(amplitudes)) {
        if (amps_.size() != (std::size_t{1} << n_qubits_)) {
            throw contract_error("state: amplitude count is not 2^n_qubits");
        }
        if (std::abs(norm() - 1.0) > 1e-12) {
            throw contract_error("state: amplitudes are not unit norm");
        }
    }

    std::size_t n_qubits() const { return n_qubits_; }
    std::size_t dim() const { return amps_.size(); }

    cplx operator[](std::size_t i) const { return amps_[i]; }
    std::span<const cplx> amplitudes() const { return amps_; }
    std::span<cplx> amplitudes() { return amps_; }

    double norm() const {
        double s = 0.0;
        for (const cplx& a : amps_) {
            s += std::norm(a);
        }
        return std::sqrt(s);
    }

    // <this|other>
    cplx inner(const QuantumState& other) const {
        cplx acc{0, 0};
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            acc += std::conj(amps_[i]) * other.amps_[i];
        }
        return acc;
    }

    // In-place single-qubit matrix application; m is row-major 2x2.
    void apply_single(std::size_t qubit, const std::array<cplx, 4>& m) {
        check_qubit(qubit);
        detail::apply_single_raw(amps_, n_qubits_, qubit, m);
    }

    void apply_cnot(std::size_t control, std::size_t target) {
        check_qubit(control);
        check_qubit(target);
        if (control == target) {
            throw index_error("cnot: control and target must differ");
        }
        detail::apply_cnot_raw(amps_, n_qubits_, control, target);
    }

private:
    static std::size_t checked_qubits(std::size_t n) {
        if (n < 1 || n > kMaxQubits) {
            throw config_error("qubit count must be in [1, " +
                               std::to_string(kMaxQubits) + "], got " +
                               std::to_string(n));
        }
        return n;
    }

    void check_qubit(std::size_t q) const {
        if (q >= n_qubits_) {
            throw index_error("qubit index " + std::to_string(q) +
                              " out of range for " + std::to_string(n_qubits_) +
                              " qubits");
        }
    }

    std::size_t n_qubits_;
    std::vector<cplx> amps_;
};

inline QuantumState zero_state(std::size_t n_qubits) {
    return QuantumState(n_qubits);
}

enum class GateKind { RX, RY, RZ, H, CNOT };

inline const char* to_string(GateKind kind) {
    switch (kind) {
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::H: return "H";
    default: return "CNOT";
    }
}

inline bool is_rotation(GateKind kind) {
    return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ;
}

struct Gate {
    GateKind kind = GateKind::H;
    std::array<std::size_t, 2> targets{0, 0}; // CNOT: {control, target}
    std::size_t n_targets = 1;
    std::optional<std::size_t> param_slot;

    static Gate rx(std::size_t q, std::size_t slot) { return {GateKind::RX, {q, 0}, 1, slot}; }
    static Gate ry(std::size_t q, std::size_t slot) { return {GateKind::RY, {q, 0}, 1, slot}; }
    static Gate rz(std::size_t q, std::size_t slot) { return {GateKind::RZ, {q, 0}, 1, slot}; }
    static Gate h(std::size_t q) { return {GateKind::H, {q, 0}, 1, std::nullopt}; }
    static Gate cnot(std::size_t control, std::size_t target) {
        return {GateKind::CNOT, {control, target}, 2, std::nullopt};
    }
};

// Row-major 2x2 matrix of a single-qubit gate. Rotation angle is ignored by H.
inline std::array<cplx, 4> single_qubit_matrix(GateKind kind, double angle) {
    const double c = std::cos(angle / 2.0);
    const double s = std::sin(angle / 2.0);
    switch (kind) {
    case GateKind::RX:
        return {cplx{c, 0}, cplx{0, -s}, cplx{0, -s}, cplx{c, 0}};
    case GateKind::RY:
        return {cplx{c, 0}, cplx{-s, 0}, cplx{s, 0}, cplx{c, 0}};
    case GateKind::RZ:
        return {std::exp(cplx{0, -angle / 2.0}), cplx{0, 0}, cplx{0, 0},
                std::exp(cplx{0, angle / 2.0})};
    case GateKind::H: {
        const double r = 1.0 / std::sqrt(2.0);
        return {cplx{r, 0}, cplx{r, 0}, cplx{r, 0}, cplx{-r, 0}};
    }
    default:
        throw contract_error("single_qubit_matrix: CNOT is not single-qubit");
    }
}

// d(gate matrix)/d(angle) for the rotation gates.
inline std::array<cplx, 4> single_qubit_matrix_derivative(GateKind kind, double angle) {
    const double c = 0.5 * std::cos(angle / 2.0);
    const double s = 0.5 * std::sin(angle / 2.0);
    switch (kind) {
    case GateKind::RX:
        return {cplx{-s, 0}, cplx{0, -c}, cplx{0, -c}, cplx{-s, 0}};
    case GateKind::RY:
        return {cplx{-s, 0}, cplx{-c, 0}, cplx{c, 0}, cplx{-s, 0}};
    case GateKind::RZ:
        return {cplx{0, -0.5} * std::exp(cplx{0, -angle / 2.0}), cplx{0, 0},
                cplx{0, 0}, cplx{0, 0.5} * std::exp(cplx{0, angle / 2.0})};
    default:
        throw contract_error("matrix derivative requested for non-rotation gate");
    }
}

// Full matrix realization of a gate (2x2 or 4x4 row-major), for contract checks.
inline std::vector<cplx> gate_matrix(const Gate& gate, std::span<const double> params) {
    if (gate.kind == GateKind::CNOT) {
        std::vector<cplx> m(16, cplx{0, 0});
        m[0 * 4 + 0] = 1;
        m[1 * 4 + 1] = 1;
        m[2 * 4 + 3] = 1;
        m[3 * 4 + 2] = 1;
        return m;
    }
    double angle = 0.0;
    if (gate.param_slot) {
        if (*gate.param_slot >= params.size()) {
            throw index_error("gate parameter slot out of range");
        }
        angle = params[*gate.param_slot];
    }
    auto m2 = single_qubit_matrix(gate.kind, angle);
    return {m2.begin(), m2.end()};
}

inline double gate_angle(const Gate& gate, std::span<const double> params) {
    if (!gate.param_slot) {
        return 0.0;
    }
    if (*gate.param_slot >= params.size()) {
        throw index_error("gate parameter slot " + std::to_string(*gate.param_slot) +
                          " out of range for " + std::to_string(params.size()) +
                          " parameters");
    }
    return params[*gate.param_slot];
}

inline void apply_gate_inplace(QuantumState& state, const Gate& gate,
                               std::span<const double> params) {
    if (gate.kind == GateKind::CNOT) {
        state.apply_cnot(gate.targets[0], gate.targets[1]);
        return;
    }
    if (is_rotation(gate.kind) && !gate.param_slot) {
        throw contract_error("rotation gate has no parameter slot");
    }
    state.apply_single(gate.targets[0],
                       single_qubit_matrix(gate.kind, gate_angle(gate, params)));
}

inline QuantumState apply_gate(const QuantumState& state, const Gate& gate,
                               std::span<const double> params = {}) {
    QuantumState out = state;
    apply_gate_inplace(out, gate, params);
    return out;
}

// Amplitude encoding: n = ceil(log2 D) qubits, amplitudes s_i / ||s||, zero
// padded past D. Unit-norm inputs (within 1e-12) are stored verbatim so the
// encoding is exactly idempotent on them.
inline QuantumState amplitude_encode(std::span<const double> s) {
    const std::size_t d = s.size();
    if (d < 2) {
        throw contract_error("amplitude_encode: need dimension >= 2");
    }
    double sq = 0.0;
    for (double v : s) {
        if (!std::isfinite(v)) {
            throw numeric_error("amplitude_encode: non-finite input entry");
        }
        sq += v * v;
    }
    if (sq == 0.0) {
        throw degenerate_input_error("amplitude_encode: all-zero input vector");
    }
    const std::size_t n = ceil_log2(d);
    if (n > QuantumState::kMaxQubits) {
        throw config_error("amplitude_encode: dimension needs more than 12 qubits");
    }
    const double r = std::sqrt(sq);
    const double scale = std::abs(r - 1.0) <= 1e-12 ? 1.0 : 1.0 / r;
    std::vector<cplx> amps(std::size_t{1} << n, cplx{0, 0});
    for (std::size_t i = 0; i < d; ++i) {
        amps[i] = cplx{s[i] * scale, 0};
    }
    return QuantumState(n, std::move(amps));
}

// Angle encoding: qubit j prepared as RY(z_j)|0>.
inline QuantumState angle_encode(std::span<const double> z) {
    for (double v : z) {
        if (!std::isfinite(v)) {
            throw numeric_error("angle_encode: non-finite input entry");
        }
    }
    QuantumState state(z.size()); // ctor enforces the qubit cap
    std::vector<double> params(z.begin(), z.end());
    for (std::size_t q = 0; q < z.size(); ++q) {
        apply_gate_inplace(state, Gate::ry(q, q), params);
    }
    return state;
}

// <psi| sigma_axis^(qubit) |psi>, clamped into [-1, 1].
inline double pauli_expectation(const QuantumState& state, PauliAxis axis,
                                std::size_t qubit) {
    QuantumState tmp = state;
    tmp.apply_single(qubit, pauli_matrix(axis));
    const double value = state.inner(tmp).real();
    return std::clamp(value, -1.0, 1.0);
}

inline std::vector<double> pauli_expectation_all(const QuantumState& state,
                                                 PauliAxis axis) {
    std::vector<double> out(state.n_qubits());
    for (std::size_t q = 0; q < state.n_qubits(); ++q) {
        out[q] = pauli_expectation(state, axis, q);
    }
    return out;
}

// (r_x, r_y, r_z) of a single-qubit pure state.
inline std::array<double, 3> bloch_vector(const QuantumState& state) {
    if (state.n_qubits() != 1) {
        throw contract_error("bloch_vector: state must be single-qubit");
    }
    return {pauli_expectation(state, PauliAxis::X, 0),
            pauli_expectation(state, PauliAxis::Y, 0),
            pauli_expectation(state, PauliAxis::Z, 0)};
}

} // namespace qclus
