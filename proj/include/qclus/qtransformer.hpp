#pragma once

// Quantum self-attention, the parameterized quantum layer, the residual
// encoder stack, the sigmoid prediction head, and a classical-attention
// baseline. Forward passes come in plain and tape-recording variants; the
// tape variants feed the hand-rolled backward passes used in training.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qclus/errors.hpp"
#include "qclus/matrix.hpp"
#include "qclus/pqc.hpp"
#include "qclus/qsim.hpp"

namespace qclus {

using TokenSequence = Matrix;

// How the query/key/value readouts share circuits, after Table-IV-style
// ablation settings: three separate circuits, a shared QK circuit plus a V
// circuit, or one circuit read along three axes.
enum class SharingMode { OneQOneKOneV, OneQKOneV, OneQKV };

inline const char* to_string(SharingMode m) {
    switch (m) {
    case SharingMode::OneQOneKOneV: return "1Q-1K-1V";
    case SharingMode::OneQKOneV: return "1QK-1V";
    default: return "1QKV";
    }
}

inline SharingMode sharing_mode_from_string(const std::string& s) {
    if (s == "1Q-1K-1V") {
        return SharingMode::OneQOneKOneV;
    }
    if (s == "1QK-1V") {
        return SharingMode::OneQKOneV;
    }
    if (s == "1QKV") {
        return SharingMode::OneQKV;
    }
    throw config_error("unknown sharing mode '" + s + "'");
}

inline std::size_t circuit_count(SharingMode m) {
    switch (m) {
    case SharingMode::OneQOneKOneV: return 3;
    case SharingMode::OneQKOneV: return 2;
    default: return 1;
    }
}

struct AttentionConfig {
    SharingMode sharing_mode = SharingMode::OneQKV;
    std::size_t n_qubits = 0;
    std::size_t depth = 1; // ansatz layers; 0 means the identity circuit
    std::size_t input_dim = 0;
};

inline std::size_t circuit_evals_per_token(const AttentionConfig& cfg) {
    return circuit_count(cfg.sharing_mode);
}

// Counts circuit evaluations during QSA forward passes. Relaxed atomics: the
// total is what matters, not ordering.
struct EvalCounter {
    std::atomic<std::uint64_t> count{0};

    void add(std::uint64_t m) { count.fetch_add(m, std::memory_order_relaxed); }
    std::uint64_t value() const { return count.load(std::memory_order_relaxed); }
    void reset() { count.store(0, std::memory_order_relaxed); }
};

inline CircuitDescriptor attention_circuit(std::size_t n_qubits, std::size_t depth) {
    if (depth == 0) {
        CircuitDescriptor c;
        c.n_qubits = n_qubits;
        return c;
    }
    return build_ansatz(n_qubits, depth, Entangler::Ring);
}

// Encoding used for cfg.input_dim-sized rows: angle when the row already has
// one entry per qubit, amplitude otherwise (block 1, where rows are D-wide).
inline Encoding attention_encoding(const AttentionConfig& cfg) {
    if (cfg.input_dim == cfg.n_qubits) {
        return Encoding::Angle;
    }
    if (cfg.input_dim < 2 || ceil_log2(cfg.input_dim) != cfg.n_qubits) {
        throw contract_error("attention: input dim " + std::to_string(cfg.input_dim) +
                             " matches neither angle nor amplitude encoding on " +
                             std::to_string(cfg.n_qubits) + " qubits");
    }
    return Encoding::Amplitude;
}

namespace detail {

inline QuantumState encode_row(std::span<const double> row, Encoding enc) {
    return enc == Encoding::Amplitude ? amplitude_encode(row) : angle_encode(row);
}

// Row-wise softmax with max subtraction.
inline void softmax_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        double mx = row[0];
        for (double v : row) {
            mx = std::max(mx, v);
        }
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : row) {
            v /= sum;
        }
    }
}

} // namespace detail

struct QSAResult {
    TokenSequence out;  // k x n
    Matrix q, k, v;     // k x n expectation readouts
    Matrix attn;        // k x k row-stochastic attention
};

// Per token: encode the row, evaluate the circuit(s) of the sharing mode,
// read Q from sigma_x, K from sigma_y, V from sigma_z (separate-circuit mode
// reads sigma_z on each), then out = softmax(Q K^T / sqrt(n)) V.
inline QSAResult quantum_self_attention_detail(
    const TokenSequence& s, const AttentionConfig& cfg,
    const std::vector<std::vector<double>>& thetas, EvalCounter* counter = nullptr) {
    if (s.cols() != cfg.input_dim) {
        throw contract_error("attention: token dim " + std::to_string(s.cols()) +
                             " != configured input dim " +
                             std::to_string(cfg.input_dim));
    }
    if (s.rows() < 1) {
        throw contract_error("attention: empty token sequence");
    }
    const std::size_t n_circ = circuit_count(cfg.sharing_mode);
    if (thetas.size() != n_circ) {
        throw contract_error("attention: sharing mode " +
                             std::string(to_string(cfg.sharing_mode)) + " needs " +
                             std::to_string(n_circ) + " parameter vectors");
    }
    const CircuitDescriptor circuit = attention_circuit(cfg.n_qubits, cfg.depth);
    const Encoding enc = attention_encoding(cfg);
    const std::size_t k = s.rows();
    const std::size_t n = cfg.n_qubits;

    QSAResult r;
    r.q = Matrix(k, n);
    r.k = Matrix(k, n);
    r.v = Matrix(k, n);
    for (std::size_t h = 0; h < k; ++h) {
        const QuantumState encoded = detail::encode_row(s.row(h), enc);
        auto fill = [&](Matrix& dst, const QuantumState& st, PauliAxis axis) {
            auto vals = pauli_expectation_all(st, axis);
            std::copy(vals.begin(), vals.end(), dst.row(h).begin());
        };
        switch (cfg.sharing_mode) {
        case SharingMode::OneQKV: {
            const QuantumState st = run_circuit(circuit, thetas[0], encoded);
            fill(r.q, st, PauliAxis::X);
            fill(r.k, st, PauliAxis::Y);
            fill(r.v, st, PauliAxis::Z);
            break;
        }
        case SharingMode::OneQKOneV: {
            const QuantumState qk = run_circuit(circuit, thetas[0], encoded);
            fill(r.q, qk, PauliAxis::X);
            fill(r.k, qk, PauliAxis::Y);
            const QuantumState v = run_circuit(circuit, thetas[1], encoded);
            fill(r.v, v, PauliAxis::Z);
            break;
        }
        default: {
            fill(r.q, run_circuit(circuit, thetas[0], encoded), PauliAxis::Z);
            fill(r.k, run_circuit(circuit, thetas[1], encoded), PauliAxis::Z);
            fill(r.v, run_circuit(circuit, thetas[2], encoded), PauliAxis::Z);
            break;
        }
        }
    }
    if (counter) {
        counter->add(static_cast<std::uint64_t>(n_circ) * k);
    }

    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    r.attn = matmul(r.q, transpose(r.k));
    for (double& v : r.attn.data()) {
        v *= scale;
    }
    detail::softmax_rows(r.attn);
    r.out = matmul(r.attn, r.v);
    return r;
}

inline TokenSequence quantum_self_attention(
    const TokenSequence& s, const AttentionConfig& cfg,
    const std::vector<std::vector<double>>& thetas, EvalCounter* counter = nullptr) {
    return quantum_self_attention_detail(s, cfg, thetas, counter).out;
}

struct QSAGrad {
    Matrix d_input;                             // k x input_dim
    std::vector<std::vector<double>> d_thetas;  // one per circuit
};

// Backward pass through attention and the per-token circuits. fwd must come
// from quantum_self_attention_detail on the same arguments.
inline QSAGrad quantum_self_attention_backward(
    const TokenSequence& s, const AttentionConfig& cfg,
    const std::vector<std::vector<double>>& thetas, const QSAResult& fwd,
    const Matrix& d_out) {
    const std::size_t k = s.rows();
    const std::size_t n = cfg.n_qubits;
    if (d_out.rows() != k || d_out.cols() != n) {
        throw contract_error("attention backward: gradient shape mismatch");
    }
    const CircuitDescriptor circuit = attention_circuit(cfg.n_qubits, cfg.depth);
    const Encoding enc = attention_encoding(cfg);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));

    // out = A V: dV = A^T dOut, dA = dOut V^T.
    Matrix d_v = matmul(transpose(fwd.attn), d_out);
    Matrix d_attn = matmul(d_out, transpose(fwd.v));

    // Softmax backward per row: dM_ij = A_ij (dA_ij - sum_l dA_il A_il).
    Matrix d_scores(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            dot += d_attn(i, j) * fwd.attn(i, j);
        }
        for (std::size_t j = 0; j < k; ++j) {
            d_scores(i, j) = fwd.attn(i, j) * (d_attn(i, j) - dot);
        }
    }

    // scores = (Q K^T) * scale
    Matrix d_q = matmul(d_scores, fwd.k);
    Matrix d_k = matmul(transpose(d_scores), fwd.q);
    for (double& v : d_q.data()) {
        v *= scale;
    }
    for (double& v : d_k.data()) {
        v *= scale;
    }

    QSAGrad grad;
    grad.d_input = Matrix(k, cfg.input_dim);
    grad.d_thetas.resize(thetas.size());
    for (std::size_t c = 0; c < thetas.size(); ++c) {
        grad.d_thetas[c].assign(thetas[c].size(), 0.0);
    }

    // Per token, push dQ/dK/dV through the circuit(s) as weighted observables.
    auto accumulate = [&](std::size_t h, std::size_t circ,
                          std::span<const ObsTerm> terms) {
        auto rep = grad_adjoint_terms(circuit, thetas[circ], s.row(h), enc, terms);
        for (std::size_t j = 0; j < rep.d_theta.size(); ++j) {
            grad.d_thetas[circ][j] += rep.d_theta[j];
        }
        auto dst = grad.d_input.row(h);
        for (std::size_t j = 0; j < dst.size(); ++j) {
            dst[j] += rep.d_input[j];
        }
    };

    std::vector<ObsTerm> terms;
    terms.reserve(3 * n);
    for (std::size_t h = 0; h < k; ++h) {
        switch (cfg.sharing_mode) {
        case SharingMode::OneQKV:
            terms.clear();
            for (std::size_t q = 0; q < n; ++q) {
                terms.push_back({PauliAxis::X, q, d_q(h, q)});
                terms.push_back({PauliAxis::Y, q, d_k(h, q)});
                terms.push_back({PauliAxis::Z, q, d_v(h, q)});
            }
            accumulate(h, 0, terms);
            break;
        case SharingMode::OneQKOneV:
            terms.clear();
            for (std::size_t q = 0; q < n; ++q) {
                terms.push_back({PauliAxis::X, q, d_q(h, q)});
                terms.push_back({PauliAxis::Y, q, d_k(h, q)});
            }
            accumulate(h, 0, terms);
            terms.clear();
            for (std::size_t q = 0; q < n; ++q) {
                terms.push_back({PauliAxis::Z, q, d_v(h, q)});
            }
            accumulate(h, 1, terms);
            break;
        default: {
            const Matrix* sources[3] = {&d_q, &d_k, &d_v};
            for (std::size_t c = 0; c < 3; ++c) {
                terms.clear();
                for (std::size_t q = 0; q < n; ++q) {
                    terms.push_back({PauliAxis::Z, q, (*sources[c])(h, q)});
                }
                accumulate(h, c, terms);
            }
            break;
        }
        }
    }
    return grad;
}

// Per token: angle-encode the row, run the circuit, read per-qubit sigma_z.
inline TokenSequence parameterized_quantum_layer(const TokenSequence& z,
                                                 const CircuitDescriptor& circuit,
                                                 std::span<const double> theta) {
    if (z.cols() != circuit.n_qubits) {
        throw contract_error("pql: token dim " + std::to_string(z.cols()) +
                             " != circuit qubits " + std::to_string(circuit.n_qubits));
    }
    TokenSequence out(z.rows(), z.cols());
    for (std::size_t h = 0; h < z.rows(); ++h) {
        auto vals = expectation(circuit, theta, angle_encode(z.row(h)), PauliAxis::Z);
        std::copy(vals.begin(), vals.end(), out.row(h).begin());
    }
    return out;
}

struct PQLGrad {
    Matrix d_input;
    std::vector<double> d_theta;
};

inline PQLGrad parameterized_quantum_layer_backward(const TokenSequence& z,
                                                    const CircuitDescriptor& circuit,
                                                    std::span<const double> theta,
                                                    const Matrix& d_out) {
    if (d_out.rows() != z.rows() || d_out.cols() != z.cols()) {
        throw contract_error("pql backward: gradient shape mismatch");
    }
    PQLGrad grad;
    grad.d_input = Matrix(z.rows(), z.cols());
    grad.d_theta.assign(theta.size(), 0.0);
    std::vector<ObsTerm> terms(circuit.n_qubits);
    for (std::size_t h = 0; h < z.rows(); ++h) {
        for (std::size_t q = 0; q < circuit.n_qubits; ++q) {
            terms[q] = ObsTerm{PauliAxis::Z, q, d_out(h, q)};
        }
        auto rep = grad_adjoint_terms(circuit, theta, z.row(h), Encoding::Angle, terms);
        for (std::size_t j = 0; j < theta.size(); ++j) {
            grad.d_theta[j] += rep.d_theta[j];
        }
        std::copy(rep.d_input.begin(), rep.d_input.end(), grad.d_input.row(h).begin());
    }
    return grad;
}

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormTape {
    Matrix xhat;                    // normalized rows before the affine map
    std::vector<double> inv_sigma;  // 1 / sqrt(var + eps) per row
};

// Per row: zero mean, unit variance (population, eps = 1e-5), then
// gain (*) xhat + bias.
inline TokenSequence layer_norm_tape(const TokenSequence& x,
                                     std::span<const double> gain,
                                     std::span<const double> bias,
                                     LayerNormTape& tape) {
    const std::size_t d = x.cols();
    if (d < 2) {
        throw contract_error("layer_norm: rows need at least 2 entries");
    }
    if (gain.size() != d || bias.size() != d) {
        throw contract_error("layer_norm: gain/bias length mismatch");
    }
    tape.xhat = Matrix(x.rows(), d);
    tape.inv_sigma.assign(x.rows(), 0.0);
    TokenSequence out(x.rows(), d);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto row = x.row(i);
        double mean = 0.0;
        for (double v : row) {
            mean += v;
        }
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (double v : row) {
            var += (v - mean) * (v - mean);
        }
        var /= static_cast<double>(d);
        const double inv_sigma = 1.0 / std::sqrt(var + kLayerNormEps);
        tape.inv_sigma[i] = inv_sigma;
        for (std::size_t j = 0; j < d; ++j) {
            const double xh = (row[j] - mean) * inv_sigma;
            tape.xhat(i, j) = xh;
            out(i, j) = gain[j] * xh + bias[j];
        }
    }
    return out;
}

inline TokenSequence layer_norm(const TokenSequence& x, std::span<const double> gain,
                                std::span<const double> bias) {
    LayerNormTape tape;
    return layer_norm_tape(x, gain, bias, tape);
}

struct LayerNormGrad {
    Matrix d_input;
    std::vector<double> d_gain;
    std::vector<double> d_bias;
};

inline LayerNormGrad layer_norm_backward(const LayerNormTape& tape,
                                         std::span<const double> gain,
                                         const Matrix& d_out) {
    const std::size_t rows = tape.xhat.rows();
    const std::size_t d = tape.xhat.cols();
    if (d_out.rows() != rows || d_out.cols() != d) {
        throw contract_error("layer_norm backward: gradient shape mismatch");
    }
    LayerNormGrad grad;
    grad.d_input = Matrix(rows, d);
    grad.d_gain.assign(d, 0.0);
    grad.d_bias.assign(d, 0.0);
    std::vector<double> dxhat(d);
    for (std::size_t i = 0; i < rows; ++i) {
        double sum_dxhat = 0.0;
        double sum_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            grad.d_gain[j] += d_out(i, j) * tape.xhat(i, j);
            grad.d_bias[j] += d_out(i, j);
            dxhat[j] = d_out(i, j) * gain[j];
            sum_dxhat += dxhat[j];
            sum_dxhat_xhat += dxhat[j] * tape.xhat(i, j);
        }
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
            grad.d_input(i, j) =
                tape.inv_sigma[i] *
                (dxhat[j] - inv_d * sum_dxhat - tape.xhat(i, j) * inv_d * sum_dxhat_xhat);
        }
    }
    return grad;
}

// ---- encoder stack ---------------------------------------------------------

struct EncoderConfig {
    std::size_t k = 0;          // tokens per instance
    std::size_t input_dim = 0;  // D, the raw token width fed to block 1
    std::size_t n_qubits = 0;
    std::size_t depth = 1;      // ansatz layers for both QSA and PQL circuits
    std::size_t blocks = 1;     // T
    SharingMode sharing = SharingMode::OneQKV;

    AttentionConfig block_attention(std::size_t block_index) const {
        AttentionConfig cfg;
        cfg.sharing_mode = sharing;
        cfg.n_qubits = n_qubits;
        cfg.depth = depth;
        cfg.input_dim = block_index == 0 ? input_dim : n_qubits;
        return cfg;
    }
};

struct BlockParams {
    std::vector<std::vector<double>> qsa_thetas;
    std::vector<double> pql_theta;
    std::vector<double> ln1_gain, ln1_bias;  // width D for block 1, n after
    std::vector<double> ln2_gain, ln2_bias;  // width n
};

struct EncoderParams {
    std::vector<BlockParams> blocks;
    Matrix w_e;                  // k x D similarity projection, used upstream
    std::vector<double> head_w;  // n
    double head_b = 0.0;
};

inline EncoderParams init_encoder_params(const EncoderConfig& cfg,
                                         std::mt19937_64& rng) {
    if (cfg.blocks < 1) {
        throw config_error("encoder: block count must be >= 1");
    }
    const std::size_t n_theta = 2 * cfg.n_qubits * cfg.depth;
    std::uniform_real_distribution<double> small(-0.1, 0.1);
    EncoderParams p;
    for (std::size_t t = 0; t < cfg.blocks; ++t) {
        BlockParams b;
        const std::size_t width = t == 0 ? cfg.input_dim : cfg.n_qubits;
        for (std::size_t c = 0; c < circuit_count(cfg.sharing); ++c) {
            b.qsa_thetas.push_back(init_params(n_theta, rng));
        }
        b.pql_theta = init_params(n_theta, rng);
        b.ln1_gain.assign(width, 1.0);
        b.ln1_bias.assign(width, 0.0);
        b.ln2_gain.assign(cfg.n_qubits, 1.0);
        b.ln2_bias.assign(cfg.n_qubits, 0.0);
        p.blocks.push_back(std::move(b));
    }
    p.w_e = Matrix(cfg.k, cfg.input_dim);
    for (double& v : p.w_e.data()) {
        v = small(rng);
    }
    p.head_w.resize(cfg.n_qubits);
    for (double& v : p.head_w) {
        v = small(rng);
    }
    p.head_b = small(rng);
    return p;
}

struct BlockTape {
    Matrix x_in;
    LayerNormTape ln1;
    Matrix ln1_out;
    QSAResult qsa;
    Matrix zprime;
    LayerNormTape ln2;
    Matrix ln2_out;
};

struct EncoderTape {
    std::vector<BlockTape> blocks;
    Matrix z_out;
};

// Block 1: Z' = QSA(LN(S)) with no residual (token width changes D -> n),
// then Z = Z' + PQL(LN(Z')). Later blocks keep both residuals.
inline TokenSequence encoder_forward_tape(const TokenSequence& s,
                                          const EncoderConfig& cfg,
                                          const EncoderParams& p, EncoderTape& tape,
                                          EvalCounter* counter = nullptr) {
    if (p.blocks.size() != cfg.blocks) {
        throw contract_error("encoder: parameter block count mismatch");
    }
    if (s.cols() != cfg.input_dim) {
        throw contract_error("encoder: input width " + std::to_string(s.cols()) +
                             " != configured D " + std::to_string(cfg.input_dim));
    }
    const CircuitDescriptor pql_circuit = attention_circuit(cfg.n_qubits, cfg.depth);
    tape.blocks.clear();
    tape.blocks.resize(cfg.blocks);
    TokenSequence z = s;
    for (std::size_t t = 0; t < cfg.blocks; ++t) {
        BlockTape& bt = tape.blocks[t];
        const BlockParams& bp = p.blocks[t];
        bt.x_in = z;
        bt.ln1_out = layer_norm_tape(z, bp.ln1_gain, bp.ln1_bias, bt.ln1);
        bt.qsa = quantum_self_attention_detail(bt.ln1_out, cfg.block_attention(t),
                                               bp.qsa_thetas, counter);
        bt.zprime = bt.qsa.out;
        if (t > 0) {
            bt.zprime += z;
        }
        bt.ln2_out = layer_norm_tape(bt.zprime, bp.ln2_gain, bp.ln2_bias, bt.ln2);
        z = bt.zprime + parameterized_quantum_layer(bt.ln2_out, pql_circuit,
                                                    bp.pql_theta);
    }
    tape.z_out = z;
    return z;
}

inline TokenSequence encoder_forward(const TokenSequence& s, const EncoderConfig& cfg,
                                     const EncoderParams& p,
                                     EvalCounter* counter = nullptr) {
    EncoderTape tape;
    return encoder_forward_tape(s, cfg, p, tape, counter);
}

struct EncoderBackwardResult {
    std::vector<BlockParams> d_blocks;  // same shapes as the parameter blocks
    Matrix d_input;                     // k x D
};

inline EncoderBackwardResult encoder_backward(const EncoderConfig& cfg,
                                              const EncoderParams& p,
                                              const EncoderTape& tape,
                                              const Matrix& d_z_out) {
    const CircuitDescriptor pql_circuit = attention_circuit(cfg.n_qubits, cfg.depth);
    EncoderBackwardResult res;
    res.d_blocks.resize(cfg.blocks);
    Matrix d_z = d_z_out;
    for (std::size_t t = cfg.blocks; t-- > 0;) {
        const BlockTape& bt = tape.blocks[t];
        const BlockParams& bp = p.blocks[t];
        BlockParams& db = res.d_blocks[t];

        // z = zprime + PQL(LN2(zprime))
        auto pql_grad = parameterized_quantum_layer_backward(bt.ln2_out, pql_circuit,
                                                             bp.pql_theta, d_z);
        db.pql_theta = std::move(pql_grad.d_theta);
        auto ln2_grad = layer_norm_backward(bt.ln2, bp.ln2_gain, pql_grad.d_input);
        db.ln2_gain = std::move(ln2_grad.d_gain);
        db.ln2_bias = std::move(ln2_grad.d_bias);
        Matrix d_zprime = d_z + ln2_grad.d_input;

        // zprime = QSA(LN1(x)) (+ x for t >= 1)
        auto qsa_grad = quantum_self_attention_backward(
            bt.ln1_out, cfg.block_attention(t), bp.qsa_thetas, bt.qsa, d_zprime);
        db.qsa_thetas = std::move(qsa_grad.d_thetas);
        auto ln1_grad = layer_norm_backward(bt.ln1, bp.ln1_gain, qsa_grad.d_input);
        db.ln1_gain = std::move(ln1_grad.d_gain);
        db.ln1_bias = std::move(ln1_grad.d_bias);

        d_z = ln1_grad.d_input;
        if (t > 0) {
            d_z += d_zprime;
        }
    }
    res.d_input = std::move(d_z);
    return res;
}

// ---- prediction head -------------------------------------------------------

// Per token: sigmoid(w . row + b), clamped away from exact 0/1 so downstream
// log terms stay finite.
inline std::vector<double> head_forward(const TokenSequence& z,
                                        std::span<const double> head_w,
                                        double head_b) {
    if (z.cols() != head_w.size()) {
        throw contract_error("head: weight length != token width");
    }
    std::vector<double> y(z.rows());
    for (std::size_t h = 0; h < z.rows(); ++h) {
        double logit = head_b;
        auto row = z.row(h);
        for (std::size_t j = 0; j < row.size(); ++j) {
            logit += head_w[j] * row[j];
        }
        const double p = 1.0 / (1.0 + std::exp(-logit));
        y[h] = std::clamp(p, 1e-12, 1.0 - 1e-12);
    }
    return y;
}

struct HeadGrad {
    Matrix d_input;
    std::vector<double> d_w;
    double d_b = 0.0;
};

// d_logit holds dLoss/d(logit) per token.
inline HeadGrad head_backward(const TokenSequence& z, std::span<const double> head_w,
                              std::span<const double> d_logit) {
    if (d_logit.size() != z.rows()) {
        throw contract_error("head backward: gradient length mismatch");
    }
    HeadGrad grad;
    grad.d_input = Matrix(z.rows(), z.cols());
    grad.d_w.assign(head_w.size(), 0.0);
    for (std::size_t h = 0; h < z.rows(); ++h) {
        auto row = z.row(h);
        for (std::size_t j = 0; j < row.size(); ++j) {
            grad.d_w[j] += d_logit[h] * row[j];
            grad.d_input(h, j) = d_logit[h] * head_w[j];
        }
        grad.d_b += d_logit[h];
    }
    return grad;
}

// ---- classical baseline ----------------------------------------------------

// Plain dot-product attention with square projection matrices and no
// temperature scaling.
inline TokenSequence classical_self_attention(const TokenSequence& s, const Matrix& wq,
                                              const Matrix& wk, const Matrix& wv) {
    const std::size_t d = s.cols();
    for (const Matrix* w : {&wq, &wk, &wv}) {
        if (w->rows() != d || w->cols() != d) {
            throw contract_error("classical attention: weights must be d x d");
        }
    }
    Matrix q = matmul(s, transpose(wq));
    Matrix k = matmul(s, transpose(wk));
    Matrix v = matmul(s, transpose(wv));
    Matrix scores = matmul(q, transpose(k));
    detail::softmax_rows(scores);
    return matmul(scores, v);
}

// Attention coefficients alone, for tests that inspect row sums.
inline Matrix classical_attention_coefficients(const TokenSequence& s, const Matrix& wq,
                                               const Matrix& wk) {
    Matrix q = matmul(s, transpose(wq));
    Matrix k = matmul(s, transpose(wk));
    Matrix scores = matmul(q, transpose(k));
    detail::softmax_rows(scores);
    return scores;
}

} // namespace qclus
