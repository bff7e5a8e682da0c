#pragma once

// Training and evaluation: weighted binary cross entropy over neighbor masks,
// the full backward chain (head -> encoder -> token fusion), Adam, an epoch
// loop with cosine learning-rate decay and per-epoch checkpoints, metric
// evaluation through prune_and_link, and a k-means reference baseline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "qclus/clusterset.hpp"
#include "qclus/errors.hpp"
#include "qclus/metrics.hpp"
#include "qclus/qtransformer.hpp"
#include "qclus/util.hpp"

namespace qclus {

struct TrainConfig {
    std::size_t k = 8;       // neighbors per cluster instance
    std::size_t n_qubits = 4;
    std::size_t depth = 2;   // ansatz layers
    std::size_t blocks = 1;  // encoder blocks T
    SharingMode sharing = SharingMode::OneQKV;
    FusionMode fusion = FusionMode::PerPosition;
    double lr = 0.05;
    std::size_t epochs = 12;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
    double tau = 0.5;
    double pos_weight = 1.0;

    void validate() const {
        if (k < 1 || n_qubits < 1 || depth < 1 || blocks < 1 || epochs < 1 ||
            batch_size < 1) {
            throw config_error("train config: all counts must be >= 1");
        }
        if (!std::isfinite(lr) || lr < 0.0) {
            throw config_error("train config: learning rate must be finite and >= 0");
        }
        if (!(tau > 0.0 && tau < 1.0)) {
            throw config_error("train config: tau must lie strictly inside (0, 1)");
        }
        if (!std::isfinite(pos_weight) || pos_weight <= 0.0) {
            throw config_error("train config: positive-class weight must be > 0");
        }
    }

    EncoderConfig encoder(std::size_t input_dim) const {
        EncoderConfig e;
        e.k = k;
        e.input_dim = input_dim;
        e.n_qubits = n_qubits;
        e.depth = depth;
        e.blocks = blocks;
        e.sharing = sharing;
        return e;
    }
};

// A feature matrix plus the kNN cluster instances built from it.
struct ClusterDataset {
    FeatureSet features;
    std::vector<ClusterInstance> clusters;

    std::size_t k() const { return clusters.empty() ? 0 : clusters[0].members.size(); }
};

inline ClusterDataset build_dataset(FeatureSet f, std::size_t k, std::size_t threads = 1) {
    ClusterDataset d;
    d.clusters = knn_clusters(f, k, threads);
    d.features = std::move(f);
    return d;
}

// ---- loss -----------------------------------------------------------------

// L = -sum_h [ w * m_h * log y_h + (1 - m_h) * log(1 - y_h) ]
inline double bce_loss(std::span<const double> y, std::span<const std::uint8_t> mask,
                       double pos_weight = 1.0) {
    if (y.size() != mask.size() || y.empty()) {
        throw contract_error("bce_loss: prediction/mask length mismatch");
    }
    double loss = 0.0;
    for (std::size_t h = 0; h < y.size(); ++h) {
        if (!(y[h] > 0.0 && y[h] < 1.0)) {
            throw contract_error("bce_loss: predictions must lie strictly inside (0,1)");
        }
        loss -= mask[h] ? pos_weight * std::log(y[h]) : std::log1p(-y[h]);
    }
    return loss;
}

// dL/dlogit for sigmoid outputs under the loss above.
inline std::vector<double> bce_logit_grad(std::span<const double> y,
                                          std::span<const std::uint8_t> mask,
                                          double pos_weight = 1.0) {
    std::vector<double> d(y.size());
    for (std::size_t h = 0; h < y.size(); ++h) {
        d[h] = mask[h] ? pos_weight * (y[h] - 1.0) : y[h];
    }
    return d;
}

// ---- trainable tensor traversal --------------------------------------------

// Gradients are laid out exactly like the parameters they belong to.
using GradientSet = EncoderParams;

template <typename Params>
struct TensorRef {
    std::string name;
    std::span<std::conditional_t<std::is_const_v<Params>, const double, double>> data;
};

// Every trainable tensor, in a fixed order shared by the optimizer and the
// checkpoint format.
template <typename Params>
std::vector<TensorRef<Params>> tensor_refs(Params& p) {
    std::vector<TensorRef<Params>> out;
    for (std::size_t t = 0; t < p.blocks.size(); ++t) {
        auto& b = p.blocks[t];
        const std::string prefix = "block" + std::to_string(t) + ".";
        for (std::size_t c = 0; c < b.qsa_thetas.size(); ++c) {
            out.push_back({prefix + "qsa" + std::to_string(c), b.qsa_thetas[c]});
        }
        out.push_back({prefix + "pql", b.pql_theta});
        out.push_back({prefix + "ln1_gain", b.ln1_gain});
        out.push_back({prefix + "ln1_bias", b.ln1_bias});
        out.push_back({prefix + "ln2_gain", b.ln2_gain});
        out.push_back({prefix + "ln2_bias", b.ln2_bias});
    }
    out.push_back({"w_e", {p.w_e.data().data(), p.w_e.data().size()}});
    out.push_back({"head_w", p.head_w});
    out.push_back({"head_b", {&p.head_b, 1}});
    return out;
}

inline std::size_t tensor_size_total(const EncoderParams& p) {
    std::size_t total = 0;
    for (const auto& r : tensor_refs(p)) {
        total += r.data.size();
    }
    return total;
}

inline GradientSet zero_like(const EncoderParams& p) {
    GradientSet g;
    for (const auto& b : p.blocks) {
        BlockParams z;
        for (const auto& th : b.qsa_thetas) {
            z.qsa_thetas.emplace_back(th.size(), 0.0);
        }
        z.pql_theta.assign(b.pql_theta.size(), 0.0);
        z.ln1_gain.assign(b.ln1_gain.size(), 0.0);
        z.ln1_bias.assign(b.ln1_bias.size(), 0.0);
        z.ln2_gain.assign(b.ln2_gain.size(), 0.0);
        z.ln2_bias.assign(b.ln2_bias.size(), 0.0);
        g.blocks.push_back(std::move(z));
    }
    g.w_e = Matrix(p.w_e.rows(), p.w_e.cols());
    g.head_w.assign(p.head_w.size(), 0.0);
    g.head_b = 0.0;
    return g;
}

// acc += scale * g, tensor by tensor.
inline void grad_accumulate(GradientSet& acc, const GradientSet& g, double scale = 1.0) {
    auto a = tensor_refs(acc);
    auto b = tensor_refs(std::as_const(g));
    if (a.size() != b.size()) {
        throw contract_error("gradient accumulate: tensor count mismatch");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].data.size() != b[i].data.size()) {
            throw contract_error("gradient accumulate: shape mismatch on " + a[i].name);
        }
        for (std::size_t j = 0; j < a[i].data.size(); ++j) {
            a[i].data[j] += scale * b[i].data[j];
        }
    }
}

inline void grad_scale(GradientSet& g, double scale) {
    for (auto& r : tensor_refs(g)) {
        for (double& v : r.data) {
            v *= scale;
        }
    }
}

inline double grad_norm(const GradientSet& g) {
    double s = 0.0;
    for (const auto& r : tensor_refs(g)) {
        for (double v : r.data) {
            s += v * v;
        }
    }
    return std::sqrt(s);
}

// ---- Adam -------------------------------------------------------------------

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct AdamState {
    std::vector<double> m, v;  // flat, in tensor_refs order
    std::uint64_t t = 0;

    static AdamState for_params(const EncoderParams& p) {
        AdamState s;
        const std::size_t total = tensor_size_total(p);
        s.m.assign(total, 0.0);
        s.v.assign(total, 0.0);
        return s;
    }
};

inline void adam_step(EncoderParams& params, const GradientSet& grads, AdamState& state,
                      double lr) {
    auto prefs = tensor_refs(params);
    auto grefs = tensor_refs(std::as_const(grads));
    if (prefs.size() != grefs.size()) {
        throw contract_error("adam_step: tensor count mismatch");
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.t));
    std::size_t off = 0;
    for (std::size_t i = 0; i < prefs.size(); ++i) {
        if (prefs[i].data.size() != grefs[i].data.size()) {
            throw contract_error("adam_step: shape mismatch on " + prefs[i].name);
        }
        for (std::size_t j = 0; j < prefs[i].data.size(); ++j, ++off) {
            if (off >= state.m.size()) {
                throw contract_error("adam_step: optimizer state smaller than params");
            }
            const double g = grefs[i].data[j];
            state.m[off] = kAdamBeta1 * state.m[off] + (1.0 - kAdamBeta1) * g;
            state.v[off] = kAdamBeta2 * state.v[off] + (1.0 - kAdamBeta2) * g * g;
            const double mhat = state.m[off] / bc1;
            const double vhat = state.v[off] / bc2;
            prefs[i].data[j] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
        }
    }
    if (off != state.m.size()) {
        throw contract_error("adam_step: optimizer state larger than params");
    }
}

// ---- per-instance forward / backward ----------------------------------------

inline std::vector<double> predict_instance(const ClusterInstance& c, const FeatureSet& f,
                                            const EncoderConfig& cfg,
                                            const EncoderParams& p, FusionMode fusion,
                                            EvalCounter* counter = nullptr) {
    const TokenSequence s = fuse_tokens(c, f, p.w_e, fusion);
    const TokenSequence z = encoder_forward(s, cfg, p, counter);
    return head_forward(z, p.head_w, p.head_b);
}

struct InstanceResult {
    double loss = 0.0;
    GradientSet grad;
};

inline InstanceResult instance_loss_grad(const ClusterInstance& c, const FeatureSet& f,
                                         const EncoderConfig& cfg, const EncoderParams& p,
                                         FusionMode fusion, double pos_weight) {
    if (c.mask.size() != c.members.size()) {
        throw contract_error("training needs a ground-truth mask on every instance; "
                             "instance " + std::to_string(c.center) + " has none");
    }
    const TokenSequence s = fuse_tokens(c, f, p.w_e, fusion);
    EncoderTape tape;
    const TokenSequence z = encoder_forward_tape(s, cfg, p, tape);
    const std::vector<double> y = head_forward(z, p.head_w, p.head_b);
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw numeric_error("non-finite prediction on cluster instance " +
                                std::to_string(c.center));
        }
    }

    InstanceResult res;
    res.loss = bce_loss(y, c.mask, pos_weight);
    if (!std::isfinite(res.loss)) {
        throw numeric_error("non-finite loss on cluster instance " +
                            std::to_string(c.center));
    }
    const std::vector<double> d_logit = bce_logit_grad(y, c.mask, pos_weight);
    const HeadGrad hg = head_backward(z, p.head_w, d_logit);
    EncoderBackwardResult eb = encoder_backward(cfg, p, tape, hg.d_input);
    res.grad.blocks = std::move(eb.d_blocks);
    res.grad.w_e = fuse_tokens_backward(c, eb.d_input, fusion);
    res.grad.head_w = hg.d_w;
    res.grad.head_b = hg.d_b;
    return res;
}

struct BatchResult {
    double mean_loss = 0.0;
    GradientSet grad;  // mean over the batch
};

// Per-instance work may run on several threads; the fold into the accumulator
// walks the batch in index order so the result never depends on thread count.
inline BatchResult batch_loss_grad(const ClusterDataset& data,
                                   std::span<const std::size_t> indices,
                                   const EncoderConfig& cfg, const EncoderParams& p,
                                   FusionMode fusion, double pos_weight,
                                   std::size_t threads = 1) {
    if (indices.empty()) {
        throw contract_error("batch_loss_grad: empty batch");
    }
    std::vector<InstanceResult> results(indices.size());
    parallel_for(indices.size(), threads, [&](std::size_t i) {
        results[i] = instance_loss_grad(data.clusters[indices[i]], data.features, cfg, p,
                                        fusion, pos_weight);
    });

    BatchResult out;
    out.grad = zero_like(p);
    double loss_sum = 0.0;
    for (const auto& r : results) {
        loss_sum += r.loss;
        grad_accumulate(out.grad, r.grad);
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    out.mean_loss = loss_sum * inv;
    grad_scale(out.grad, inv);
    return out;
}

// ---- checkpoints and the training loop ---------------------------------------

inline std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

inline std::mt19937_64 rng_from_string(const std::string& s) {
    std::mt19937_64 rng;
    std::istringstream is(s);
    is >> rng;
    if (!is) {
        throw format_error("checkpoint: unparseable RNG state");
    }
    return rng;
}

struct Checkpoint {
    TrainConfig config;
    std::size_t input_dim = 0;
    std::size_t epoch = 0;  // completed epochs
    EncoderParams params;
    AdamState opt;
    std::string rng_state;
};

struct TrainHooks {
    std::function<void(std::size_t epoch, std::size_t batch, double loss, double lr)>
        on_batch;
    std::function<void(const Checkpoint& ck, double mean_loss, double lr)> on_epoch;
};

struct TrainResult {
    Checkpoint checkpoint;             // last completed epoch (or the start state)
    std::vector<double> epoch_losses;  // mean per-instance loss per completed epoch
    bool aborted = false;
    std::string abort_reason;
};

namespace detail {

inline void check_dataset(const ClusterDataset& data, const TrainConfig& cfg,
                          std::size_t input_dim, bool need_masks) {
    if (data.clusters.empty()) {
        throw contract_error("dataset has no cluster instances");
    }
    if (data.features.dim() != input_dim) {
        throw contract_error("dataset feature width " + std::to_string(data.features.dim()) +
                             " != configured input width " + std::to_string(input_dim));
    }
    for (const auto& c : data.clusters) {
        if (c.members.size() != cfg.k || c.sims.size() != cfg.k) {
            throw contract_error("cluster instance " + std::to_string(c.center) +
                                 " has size " + std::to_string(c.members.size()) +
                                 ", expected k=" + std::to_string(cfg.k));
        }
        if (need_masks && c.mask.size() != cfg.k) {
            throw contract_error("cluster instance " + std::to_string(c.center) +
                                 " lacks a ground-truth mask; training needs labels");
        }
    }
}

} // namespace detail

inline double cosine_lr(double lr0, std::size_t epoch, std::size_t total_epochs) {
    return lr0 * 0.5 *
           (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                           static_cast<double>(total_epochs)));
}

// Continues training from a checkpoint until config.epochs. A numeric failure
// aborts the loop and the result carries the last good epoch's checkpoint.
inline TrainResult train_from(Checkpoint start, const ClusterDataset& data,
                              const TrainHooks& hooks = {}, std::size_t threads = 1) {
    const TrainConfig cfg = start.config;
    cfg.validate();
    detail::check_dataset(data, cfg, start.input_dim, true);
    const EncoderConfig enc = cfg.encoder(start.input_dim);

    auto rng = rng_from_string(start.rng_state);
    EncoderParams params = start.params;
    AdamState opt = start.opt;

    TrainResult out;
    out.checkpoint = std::move(start);

    const std::size_t n = data.clusters.size();
    std::vector<std::size_t> order(n);

    for (std::size_t epoch = out.checkpoint.epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = cosine_lr(cfg.lr, epoch, cfg.epochs);
        // Re-derive the permutation from the identity each epoch so a resumed
        // run shuffles exactly like the straight run would have.
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        try {
            std::size_t batch_index = 0;
            for (std::size_t lo = 0; lo < n; lo += cfg.batch_size, ++batch_index) {
                const std::size_t len = std::min(cfg.batch_size, n - lo);
                auto br = batch_loss_grad(data, std::span(order).subspan(lo, len), enc,
                                          params, cfg.fusion, cfg.pos_weight, threads);
                adam_step(params, br.grad, opt, lr);
                loss_sum += br.mean_loss * static_cast<double>(len);
                if (hooks.on_batch) {
                    hooks.on_batch(epoch, batch_index, br.mean_loss, lr);
                }
            }
        } catch (const numeric_error& e) {
            out.aborted = true;
            out.abort_reason = e.what();
            return out;
        }
        out.epoch_losses.push_back(loss_sum / static_cast<double>(n));
        out.checkpoint.params = params;
        out.checkpoint.opt = opt;
        out.checkpoint.epoch = epoch + 1;
        out.checkpoint.rng_state = rng_to_string(rng);
        if (hooks.on_epoch) {
            hooks.on_epoch(out.checkpoint, out.epoch_losses.back(), lr);
        }
    }
    return out;
}

inline TrainResult train(const TrainConfig& cfg, const ClusterDataset& data,
                         const TrainHooks& hooks = {}, std::size_t threads = 1) {
    cfg.validate();
    auto rng = make_rng(cfg.seed);
    Checkpoint start;
    start.config = cfg;
    start.input_dim = data.features.dim();
    start.epoch = 0;
    start.params = init_encoder_params(cfg.encoder(start.input_dim), rng);
    start.opt = AdamState::for_params(start.params);
    start.rng_state = rng_to_string(rng);
    return train_from(std::move(start), data, hooks, threads);
}

// ---- evaluation ---------------------------------------------------------------

struct EvalResult {
    MetricReport report;
    std::vector<std::vector<double>> predictions;  // per instance, length k
    LabelVector predicted;                         // prune_and_link output
};

inline std::vector<std::vector<double>> predict_all(const Checkpoint& ck,
                                                    const ClusterDataset& data,
                                                    std::size_t threads = 1,
                                                    EvalCounter* counter = nullptr) {
    ck.config.validate();
    detail::check_dataset(data, ck.config, ck.input_dim, false);
    const EncoderConfig enc = ck.config.encoder(ck.input_dim);
    std::vector<std::vector<double>> preds(data.clusters.size());
    parallel_for(data.clusters.size(), threads, [&](std::size_t i) {
        preds[i] = predict_instance(data.clusters[i], data.features, enc, ck.params,
                                    ck.config.fusion, counter);
    });
    return preds;
}

inline EvalResult evaluate_predictions(const std::vector<ClusterInstance>& clusters,
                                       std::vector<std::vector<double>> predictions,
                                       double tau, const LabelVector& gt) {
    EvalResult r;
    r.predicted = prune_and_link(clusters, predictions, tau);
    r.report = evaluate_labels(gt, r.predicted);
    r.predictions = std::move(predictions);
    return r;
}

inline EvalResult evaluate(const Checkpoint& ck, const ClusterDataset& data,
                           std::size_t threads = 1) {
    if (!data.features.labels) {
        throw contract_error("evaluate: dataset carries no ground-truth labels");
    }
    auto preds = predict_all(ck, data, threads);
    return evaluate_predictions(data.clusters, std::move(preds), ck.config.tau,
                                *data.features.labels);
}

// ---- k-means baseline -----------------------------------------------------------

struct KMeansResult {
    LabelVector labels;
    std::vector<double> inertia_trace;  // one entry per Lloyd iteration
};

inline KMeansResult kmeans_detail(const FeatureSet& f, std::size_t n_clusters,
                                  std::uint64_t seed, std::size_t max_iters = 300,
                                  double tol = 1e-6) {
    const std::size_t n = f.size();
    const std::size_t d = f.dim();
    if (n_clusters < 1 || n_clusters > n) {
        throw contract_error("kmeans: n_clusters must be in [1, N]");
    }
    auto rng = make_rng(seed);

    auto dist2 = [&](std::span<const double> x, std::span<const double> c) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = x[j] - c[j];
            s += diff * diff;
        }
        return s;
    };

    // k-means++ seeding.
    std::vector<std::vector<double>> centers;
    centers.reserve(n_clusters);
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    auto push_center = [&](std::size_t i) {
        centers.emplace_back(f.features.row(i).begin(), f.features.row(i).end());
    };
    push_center(first(rng));
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    while (centers.size() < n_clusters) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            best[i] = std::min(best[i], dist2(f.features.row(i), centers.back()));
            total += best[i];
        }
        if (total <= 0.0) {
            // Fewer distinct points than requested centers; fall back to uniform.
            push_center(first(rng));
            continue;
        }
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng);
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            r -= best[i];
            if (r <= 0.0) {
                pick = i;
                break;
            }
        }
        push_center(pick);
    }

    // Lloyd iterations.
    KMeansResult out;
    out.labels.assign(n, 0);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best_d = std::numeric_limits<double>::infinity();
            std::uint32_t best_c = 0;
            for (std::size_t c = 0; c < centers.size(); ++c) {
                const double dd = dist2(f.features.row(i), centers[c]);
                if (dd < best_d) {
                    best_d = dd;
                    best_c = static_cast<std::uint32_t>(c);
                }
            }
            out.labels[i] = best_c;
            inertia += best_d;
        }

        // Relocate empty clusters onto the points farthest from their current
        // centers, which can only shrink the objective.
        std::vector<std::size_t> counts(n_clusters, 0);
        for (auto l : out.labels) {
            ++counts[l];
        }
        for (std::size_t c = 0; c < n_clusters; ++c) {
            if (counts[c] > 0) {
                continue;
            }
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[out.labels[i]] <= 1) {
                    continue;
                }
                const double dd = dist2(f.features.row(i), centers[out.labels[i]]);
                if (dd > far_d) {
                    far_d = dd;
                    far = i;
                }
            }
            if (far == n) {
                continue;  // no donor cluster with more than one member
            }
            auto row = f.features.row(far);
            centers[c].assign(row.begin(), row.end());
            --counts[out.labels[far]];
            out.labels[far] = static_cast<std::uint32_t>(c);
            ++counts[c];
        }

        std::vector<std::vector<double>> sums(n_clusters, std::vector<double>(d, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            auto row = f.features.row(i);
            auto& c = sums[out.labels[i]];
            for (std::size_t j = 0; j < d; ++j) {
                c[j] += row[j];
            }
        }
        for (std::size_t c = 0; c < n_clusters; ++c) {
            if (counts[c] == 0) {
                continue;  // keep the stale center rather than divide by zero
            }
            for (std::size_t j = 0; j < d; ++j) {
                centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
            }
        }

        out.inertia_trace.push_back(inertia);
        if (prev < std::numeric_limits<double>::infinity() &&
            (prev - inertia) <= tol * prev) {
            break;
        }
        prev = inertia;
    }
    return out;
}

inline LabelVector kmeans_baseline(const FeatureSet& f, std::size_t n_clusters,
                                   std::uint64_t seed) {
    return kmeans_detail(f, n_clusters, seed).labels;
}

} // namespace qclus
