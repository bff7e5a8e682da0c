#pragma once

// Helpers shared across test files: random parameter/input draws and a dense
// oracle realization of a whole circuit.

#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "qclus/pqc.hpp"
#include "oracles.hpp"

namespace support {

inline std::vector<double> random_theta(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-std::numbers::pi, std::numbers::pi);
    std::vector<double> theta(n);
    for (double& t : theta) {
        t = dist(rng);
    }
    return theta;
}

inline std::vector<double> random_input(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(d);
    double sq = 0.0;
    for (double& x : v) {
        x = gauss(rng);
        sq += x * x;
    }
    if (sq < 1e-12) {
        v[0] = 1.0;
    }
    return v;
}

// Full 2^n x 2^n unitary of a circuit, assembled from oracle matrices.
inline oracle::CMat oracle_full_matrix(const qclus::CircuitDescriptor& c,
                                       std::span<const double> theta) {
    oracle::CMat u = oracle::cidentity(std::size_t{1} << c.n_qubits);
    for (const qclus::Gate& g : c.gates) {
        oracle::CMat m;
        switch (g.kind) {
        case qclus::GateKind::RX:
            m = oracle::lift_single(oracle::mat_rx(theta[*g.param_slot]), g.targets[0],
                                    c.n_qubits);
            break;
        case qclus::GateKind::RY:
            m = oracle::lift_single(oracle::mat_ry(theta[*g.param_slot]), g.targets[0],
                                    c.n_qubits);
            break;
        case qclus::GateKind::RZ:
            m = oracle::lift_single(oracle::mat_rz(theta[*g.param_slot]), g.targets[0],
                                    c.n_qubits);
            break;
        case qclus::GateKind::H:
            m = oracle::lift_single(oracle::mat_h(), g.targets[0], c.n_qubits);
            break;
        default:
            m = oracle::lift_cnot(g.targets[0], g.targets[1], c.n_qubits);
            break;
        }
        u = oracle::cmatmul(m, u);
    }
    return u;
}

} // namespace support
