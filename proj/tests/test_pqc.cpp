#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "qclus/pqc.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace qclus;
using Catch::Matchers::WithinAbs;
using support::oracle_full_matrix;
using support::random_input;
using support::random_theta;

namespace {

constexpr double kPi = std::numbers::pi;

CircuitDescriptor identity_circuit(std::size_t n_qubits) {
    CircuitDescriptor c;
    c.n_qubits = n_qubits;
    return c;
}

CircuitDescriptor single_ry_circuit() {
    CircuitDescriptor c;
    c.n_qubits = 1;
    c.layers = 1;
    c.n_params = 1;
    c.gates.push_back(Gate::ry(0, 0));
    return c;
}

} // namespace

TEST_CASE("build_ansatz gate and parameter counts", "[pqc]") {
    auto a = build_ansatz(2, 1, Entangler::Ring);
    REQUIRE(a.n_params == 4);
    std::size_t rotations = 0, cnots = 0;
    for (const Gate& g : a.gates) {
        if (g.param_slot) {
            ++rotations;
        }
        if (g.kind == GateKind::CNOT) {
            ++cnots;
        }
    }
    REQUIRE(rotations == 4);
    REQUIRE(cnots == 2);
    REQUIRE_NOTHROW(a.validate());

    auto b = build_ansatz(1, 1, Entangler::Ring);
    REQUIRE(b.n_params == 2);
    for (const Gate& g : b.gates) {
        REQUIRE(g.kind != GateKind::CNOT);
    }
    REQUIRE(b.gates.size() == 2);

    auto c = build_ansatz(3, 2, Entangler::Line);
    REQUIRE(c.n_params == 12);
    std::size_t line_cnots = 0;
    for (const Gate& g : c.gates) {
        if (g.kind == GateKind::CNOT) {
            ++line_cnots;
        }
    }
    REQUIRE(line_cnots == 4);
    REQUIRE_NOTHROW(c.validate());

    REQUIRE_THROWS_AS(build_ansatz(0, 1, Entangler::Ring), contract_error);
    REQUIRE_THROWS_AS(build_ansatz(2, 0, Entangler::Ring), contract_error);
}

TEST_CASE("circuit validation catches broken descriptors", "[pqc]") {
    auto c = build_ansatz(2, 1, Entangler::Ring);

    auto bad_slot = c;
    bad_slot.gates[0].param_slot = 99;
    REQUIRE_THROWS_AS(bad_slot.validate(), index_error);

    auto dup_slot = c;
    dup_slot.gates[1].param_slot = *dup_slot.gates[0].param_slot;
    REQUIRE_THROWS_AS(dup_slot.validate(), contract_error);

    auto bad_target = c;
    bad_target.gates[0].targets[0] = 5;
    REQUIRE_THROWS_AS(bad_target.validate(), index_error);

    auto unused = c;
    unused.n_params = 5;
    REQUIRE_THROWS_AS(unused.validate(), contract_error);
}

TEST_CASE("expectation on identity and single-rotation circuits", "[pqc]") {
    auto id = identity_circuit(1);
    auto vals = expectation(id, {}, zero_state(1), PauliAxis::Z);
    REQUIRE(vals == std::vector<double>{1.0});

    auto ry = single_ry_circuit();
    const std::vector<double> theta{kPi / 3.0};
    auto out = expectation(ry, theta, zero_state(1), PauliAxis::Z);
    REQUIRE_THAT(out[0], WithinAbs(0.5, 1e-15));
}

TEST_CASE("expectation argument checks", "[pqc]") {
    auto a = build_ansatz(2, 1, Entangler::Ring);
    const std::vector<double> short_theta{0.1};
    REQUIRE_THROWS_AS(expectation(a, short_theta, zero_state(2), PauliAxis::Z),
                      contract_error);
    const std::vector<double> theta(a.n_params, 0.1);
    REQUIRE_THROWS_AS(expectation(a, theta, zero_state(3), PauliAxis::Z),
                      contract_error);
}

TEST_CASE("expectation matches dense oracle and stays bounded", "[pqc]") {
    std::mt19937_64 rng(23);
    for (std::size_t n = 1; n <= 3; ++n) {
        for (int trial = 0; trial < 20; ++trial) {
            auto c = build_ansatz(n, 1 + trial % 3, Entangler::Ring);
            auto theta = random_theta(c.n_params, rng);
            auto input = random_input(std::max<std::size_t>(2, std::size_t{1} << n), rng);
            auto state = amplitude_encode(input);

            const auto u = oracle_full_matrix(c, theta);
            oracle::CVec v(state.amplitudes().begin(), state.amplitudes().end());
            v = oracle::cmatvec(u, v);

            for (PauliAxis axis : {PauliAxis::X, PauliAxis::Y, PauliAxis::Z}) {
                auto vals = expectation(c, theta, state, axis);
                for (std::size_t q = 0; q < n; ++q) {
                    oracle::CMat sigma =
                        axis == PauliAxis::X   ? oracle::mat_x()
                        : axis == PauliAxis::Y ? oracle::mat_y()
                                               : oracle::mat_z();
                    const double want =
                        oracle::expectation(oracle::lift_single(sigma, q, n), v);
                    REQUIRE_THAT(vals[q], WithinAbs(want, 1e-10));
                    REQUIRE(vals[q] >= -1.0);
                    REQUIRE(vals[q] <= 1.0);
                }
            }
        }
    }
}

TEST_CASE("parameter-shift on a lone RY matches the analytic derivative", "[pqc]") {
    auto ry = single_ry_circuit();
    for (int i = 0; i < 32; ++i) {
        const double t = -kPi + 2.0 * kPi * i / 31.0;
        const std::vector<double> theta{t};
        auto g = grad_parameter_shift(ry, theta, zero_state(1), PauliAxis::Z, 0);
        REQUIRE_THAT(g[0], WithinAbs(-std::sin(t), 1e-12));
    }
    const std::vector<double> at_zero{0.0};
    auto g0 = grad_parameter_shift(ry, at_zero, zero_state(1), PauliAxis::Z, 0);
    REQUIRE_THAT(g0[0], WithinAbs(0.0, 1e-15));
}

TEST_CASE("parameter-shift rejects parameterized gates without a shift rule", "[pqc]") {
    CircuitDescriptor c;
    c.n_qubits = 1;
    c.n_params = 1;
    Gate weird = Gate::h(0);
    weird.param_slot = 0;
    c.gates.push_back(weird);
    const std::vector<double> theta{0.3};
    REQUIRE_THROWS_AS(grad_parameter_shift(c, theta, zero_state(1), PauliAxis::Z, 0),
                      unsupported_error);
}

TEST_CASE("three gradient paths agree on random ansatz circuits", "[pqc]") {
    std::mt19937_64 rng(29);
    std::uniform_int_distribution<std::size_t> n_pick(1, 4);
    std::uniform_int_distribution<std::size_t> l_pick(1, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = n_pick(rng);
        const std::size_t layers = l_pick(rng);
        const Entangler ent = trial % 2 ? Entangler::Ring : Entangler::Line;
        auto c = build_ansatz(n, layers, ent);
        auto theta = random_theta(c.n_params, rng);
        const PauliAxis axis = trial % 3 == 0   ? PauliAxis::X
                               : trial % 3 == 1 ? PauliAxis::Y
                                                : PauliAxis::Z;

        const Encoding enc = trial % 2 ? Encoding::Amplitude : Encoding::Angle;
        auto input = random_input(enc == Encoding::Angle ? n
                                                         : std::max<std::size_t>(
                                                               2, std::size_t{1} << n),
                                  rng);
        auto state = enc == Encoding::Amplitude ? amplitude_encode(input)
                                                : angle_encode(input);

        // Shift gradients of the per-qubit sum.
        std::vector<double> shift_sum(c.n_params, 0.0);
        for (std::size_t q = 0; q < n; ++q) {
            auto g = grad_parameter_shift(c, theta, state, axis, q);
            for (std::size_t j = 0; j < g.size(); ++j) {
                shift_sum[j] += g[j];
            }
        }

        auto adj = grad_adjoint(c, theta, input, enc, axis);
        auto fd = grad_finite_diff(c, theta, input, enc, axis, 1e-4);

        REQUIRE(adj.d_theta.size() == c.n_params);
        REQUIRE(adj.d_input.size() == input.size());
        for (std::size_t j = 0; j < c.n_params; ++j) {
            REQUIRE_THAT(shift_sum[j], WithinAbs(fd.d_theta[j], 1e-6));
            REQUIRE_THAT(shift_sum[j], WithinAbs(adj.d_theta[j], 1e-8));
        }
        for (std::size_t j = 0; j < input.size(); ++j) {
            REQUIRE_THAT(adj.d_input[j], WithinAbs(fd.d_input[j], 1e-5));
            REQUIRE(std::isfinite(adj.d_input[j]));
        }
    }
}

TEST_CASE("adjoint input gradient for a bare angle encoding", "[pqc]") {
    auto id = identity_circuit(1);
    for (double t : {0.0, 0.4, kPi / 3.0, -1.2, 2.9}) {
        const std::vector<double> z{t};
        auto rep = grad_adjoint(id, {}, z, Encoding::Angle, PauliAxis::Z);
        REQUIRE(rep.d_theta.empty());
        REQUIRE_THAT(rep.d_input[0], WithinAbs(-std::sin(t), 1e-12));
    }
}

TEST_CASE("amplitude-encoding gradient matches tangent directional derivatives", "[pqc]") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        auto c = build_ansatz(2, 2, Entangler::Ring);
        auto theta = random_theta(c.n_params, rng);

        auto s = random_input(4, rng);
        double norm = 0.0;
        for (double v : s) {
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : s) {
            v /= norm;
        }

        // Random unit tangent at s.
        auto t = random_input(4, rng);
        double dot = 0.0;
        for (int i = 0; i < 4; ++i) {
            dot += t[i] * s[i];
        }
        double tlen = 0.0;
        for (int i = 0; i < 4; ++i) {
            t[i] -= dot * s[i];
            tlen += t[i] * t[i];
        }
        tlen = std::sqrt(tlen);
        if (tlen < 1e-6) {
            continue;
        }
        for (double& v : t) {
            v /= tlen;
        }

        auto rep = grad_adjoint(c, theta, s, Encoding::Amplitude, PauliAxis::Z);
        double analytic = 0.0;
        for (int i = 0; i < 4; ++i) {
            analytic += rep.d_input[i] * t[i];
        }

        const double h = 1e-5;
        auto eval_at = [&](double step) {
            std::vector<double> moved(4);
            for (int i = 0; i < 4; ++i) {
                moved[i] = s[i] + step * t[i];
            }
            auto vals = expectation(c, theta, amplitude_encode(moved), PauliAxis::Z);
            double sum = 0.0;
            for (double v : vals) {
                sum += v;
            }
            return sum;
        };
        const double fd = (eval_at(h) - eval_at(-h)) / (2.0 * h);
        REQUIRE_THAT(analytic, WithinAbs(fd, 1e-6));
    }
}

TEST_CASE("adjoint handles weighted multi-term observables", "[pqc]") {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> w_pick(-2.0, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
        auto c = build_ansatz(3, 2, Entangler::Ring);
        auto theta = random_theta(c.n_params, rng);
        auto input = random_input(8, rng);
        auto state = amplitude_encode(input);

        std::vector<ObsTerm> terms;
        for (std::size_t q = 0; q < 3; ++q) {
            terms.push_back({PauliAxis::X, q, w_pick(rng)});
            terms.push_back({PauliAxis::Z, q, w_pick(rng)});
        }

        auto res = adjoint_diff(c.gates, theta, state, terms);

        double want_value = 0.0;
        for (const ObsTerm& t : terms) {
            want_value += t.weight * pauli_expectation(run_circuit(c, theta, state),
                                                       t.axis, t.qubit);
        }
        REQUIRE_THAT(res.value, WithinAbs(want_value, 1e-12));

        // Weighted sums of per-term shift gradients as the oracle.
        std::vector<double> want_grad(c.n_params, 0.0);
        for (const ObsTerm& t : terms) {
            auto g = grad_parameter_shift(c, theta, state, t.axis, t.qubit);
            for (std::size_t j = 0; j < g.size(); ++j) {
                want_grad[j] += t.weight * g[j];
            }
        }
        for (std::size_t j = 0; j < c.n_params; ++j) {
            REQUIRE_THAT(res.d_theta[j], WithinAbs(want_grad[j], 1e-8));
        }
    }
}

TEST_CASE("finite differences validate their step size", "[pqc]") {
    auto ry = single_ry_circuit();
    const std::vector<double> theta{0.5};
    const std::vector<double> z{0.3};
    REQUIRE_THROWS_AS(grad_finite_diff(ry, theta, z, Encoding::Angle, PauliAxis::Z, 0.0),
                      contract_error);
    REQUIRE_THROWS_AS(grad_finite_diff(ry, theta, z, Encoding::Angle, PauliAxis::Z, 0.1),
                      contract_error);
    REQUIRE_NOTHROW(grad_finite_diff(ry, theta, z, Encoding::Angle, PauliAxis::Z, 1e-2));
}

TEST_CASE("expectation is 2-pi periodic in each parameter", "[pqc]") {
    std::mt19937_64 rng(43);
    auto c = build_ansatz(3, 2, Entangler::Ring);
    auto theta = random_theta(c.n_params, rng);
    auto input = random_input(8, rng);
    auto state = amplitude_encode(input);
    auto base = expectation(c, theta, state, PauliAxis::Z);
    for (std::size_t j = 0; j < c.n_params; ++j) {
        auto shifted = theta;
        shifted[j] += 2.0 * kPi;
        auto moved = expectation(c, shifted, state, PauliAxis::Z);
        for (std::size_t q = 0; q < 3; ++q) {
            REQUIRE_THAT(moved[q], WithinAbs(base[q], 1e-12));
        }
    }
}

TEST_CASE("init_params stays inside its interval and is seed-stable", "[pqc]") {
    std::mt19937_64 a(5), b(5);
    auto t1 = init_params(64, a);
    auto t2 = init_params(64, b);
    REQUIRE(t1 == t2);
    for (double v : t1) {
        REQUIRE(v >= -kPi / 4.0);
        REQUIRE(v <= kPi / 4.0);
    }
}
