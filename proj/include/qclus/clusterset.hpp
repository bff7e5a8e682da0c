#pragma once

// Cluster dataset construction: exhaustive cosine kNN around every sample,
// similarity encodings, token fusion, ground-truth masks, and the union-find
// assembly of final clusters from per-member keep scores.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qclus/errors.hpp"
#include "qclus/matrix.hpp"
#include "qclus/util.hpp"

namespace qclus {

// Two readings of the similarity encoding: one k-vector shared by every
// token, or one scalar per token position.
enum class FusionMode { Shared, PerPosition };

inline const char* to_string(FusionMode m) {
    return m == FusionMode::Shared ? "shared" : "per-position";
}

inline FusionMode fusion_mode_from_string(const std::string& s) {
    if (s == "shared") {
        return FusionMode::Shared;
    }
    if (s == "per-position") {
        return FusionMode::PerPosition;
    }
    throw config_error("unknown fusion mode '" + s + "'");
}

struct FeatureSet {
    Matrix features;                               // N x D
    std::optional<std::vector<std::uint32_t>> labels;  // length N when present

    std::size_t size() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }
};

struct ClusterInstance {
    std::uint32_t center = 0;
    std::vector<std::uint32_t> members;  // k entries, members[0] == center
    std::vector<double> sims;            // cosine to center, non-increasing
    std::vector<std::uint8_t> mask;      // empty when labels are absent
};

namespace detail {

inline std::vector<double> row_norms(const Matrix& f) {
    std::vector<double> norms(f.rows());
    for (std::size_t i = 0; i < f.rows(); ++i) {
        double sq = 0.0;
        for (double v : f.row(i)) {
            sq += v * v;
        }
        if (sq == 0.0) {
            throw degenerate_input_error("feature row " + std::to_string(i) +
                                         " has zero norm");
        }
        norms[i] = std::sqrt(sq);
    }
    return norms;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

} // namespace detail

// Exhaustive exact kNN by cosine similarity around every sample. Ties break
// toward the lower sample index; the center is always ranked first.
inline std::vector<ClusterInstance> knn_clusters(const FeatureSet& f, std::size_t k,
                                                 std::size_t threads = 1) {
    const std::size_t n = f.size();
    if (k < 1 || k > n) {
        throw contract_error("knn_clusters: k must be in [1, N]; got k=" +
                             std::to_string(k) + ", N=" + std::to_string(n));
    }
    if (f.labels && f.labels->size() != n) {
        throw contract_error("knn_clusters: label count != sample count");
    }
    const auto norms = detail::row_norms(f.features);
    std::vector<ClusterInstance> out(n);

    parallel_for(n, threads, [&](std::size_t i) {
        std::vector<double> sim(n);
        for (std::size_t j = 0; j < n; ++j) {
            sim[j] = std::clamp(detail::dot(f.features.row(i), f.features.row(j)) /
                                    (norms[i] * norms[j]),
                                -1.0, 1.0);
        }
        std::vector<std::uint32_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            if (sim[a] != sim[b]) {
                return sim[a] > sim[b];
            }
            return a < b;
        });

        ClusterInstance& c = out[i];
        c.center = static_cast<std::uint32_t>(i);
        c.members.reserve(k);
        c.sims.reserve(k);
        c.members.push_back(c.center);
        c.sims.push_back(1.0); // the center's self-similarity, by definition
        for (std::uint32_t j : order) {
            if (c.members.size() == k) {
                break;
            }
            if (j != i) {
                c.members.push_back(j);
                c.sims.push_back(sim[j]);
            }
        }
        if (f.labels) {
            const auto& labels = *f.labels;
            c.mask.resize(k);
            for (std::size_t h = 0; h < k; ++h) {
                c.mask[h] = labels[c.members[h]] == labels[i] ? 1 : 0;
            }
        }
    });
    return out;
}

// Shared mode: k x k, every row the member-similarity vector. Per-position
// mode: k x 1, row h the similarity of member h.
inline Matrix similarity_encoding(const ClusterInstance& c, FusionMode mode) {
    const std::size_t k = c.members.size();
    if (c.sims.size() != k) {
        throw contract_error("similarity_encoding: sims/members length mismatch");
    }
    if (mode == FusionMode::Shared) {
        Matrix e(k, k);
        for (std::size_t h = 0; h < k; ++h) {
            std::copy(c.sims.begin(), c.sims.end(), e.row(h).begin());
        }
        return e;
    }
    Matrix e(k, 1);
    for (std::size_t h = 0; h < k; ++h) {
        e(h, 0) = c.sims[h];
    }
    return e;
}

// Token fusion: member features plus the similarity encoding projected by
// W_e. Shared mode adds the same combination of W_e rows to every token;
// per-position mode adds sims[h] * W_e row h to token h.
inline Matrix fuse_tokens(const ClusterInstance& c, const FeatureSet& f,
                          const Matrix& w_e, FusionMode mode) {
    const std::size_t k = c.members.size();
    const std::size_t d = f.dim();
    if (w_e.rows() != k || w_e.cols() != d) {
        throw contract_error("fuse_tokens: W_e must be k x D (" + std::to_string(k) +
                             " x " + std::to_string(d) + "), got " +
                             std::to_string(w_e.rows()) + " x " +
                             std::to_string(w_e.cols()));
    }
    Matrix s(k, d);
    if (mode == FusionMode::Shared) {
        std::vector<double> bias(d, 0.0);
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t j = 0; j < d; ++j) {
                bias[j] += c.sims[r] * w_e(r, j);
            }
        }
        for (std::size_t h = 0; h < k; ++h) {
            auto feat = f.features.row(c.members[h]);
            for (std::size_t j = 0; j < d; ++j) {
                s(h, j) = feat[j] + bias[j];
            }
        }
        return s;
    }
    for (std::size_t h = 0; h < k; ++h) {
        auto feat = f.features.row(c.members[h]);
        for (std::size_t j = 0; j < d; ++j) {
            s(h, j) = feat[j] + c.sims[h] * w_e(h, j);
        }
    }
    return s;
}

// Gradient of fuse_tokens with respect to W_e, given dLoss/dS; the two
// fusion rules distribute dS differently.
inline Matrix fuse_tokens_backward(const ClusterInstance& c, const Matrix& d_s,
                                   FusionMode mode) {
    const std::size_t k = c.members.size();
    const std::size_t d = d_s.cols();
    if (d_s.rows() != k) {
        throw contract_error("fuse_tokens_backward: gradient row count mismatch");
    }
    Matrix d_w(k, d);
    if (mode == FusionMode::Shared) {
        std::vector<double> col_sum(d, 0.0);
        for (std::size_t h = 0; h < k; ++h) {
            for (std::size_t j = 0; j < d; ++j) {
                col_sum[j] += d_s(h, j);
            }
        }
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t j = 0; j < d; ++j) {
                d_w(r, j) = c.sims[r] * col_sum[j];
            }
        }
        return d_w;
    }
    for (std::size_t h = 0; h < k; ++h) {
        for (std::size_t j = 0; j < d; ++j) {
            d_w(h, j) = c.sims[h] * d_s(h, j);
        }
    }
    return d_w;
}

namespace detail {

struct UnionFind {
    std::vector<std::uint32_t> parent;

    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }

    std::uint32_t find(std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) {
            parent[std::max(a, b)] = std::min(a, b);
        }
    }
};

} // namespace detail

// Keep members scoring >= tau (centers always), link kept members to their
// centers, and label the connected components in first-appearance order.
inline std::vector<std::uint32_t> prune_and_link(
    const std::vector<ClusterInstance>& clusters,
    const std::vector<std::vector<double>>& predictions, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw contract_error("prune_and_link: tau must be in (0, 1)");
    }
    if (predictions.size() != clusters.size()) {
        throw contract_error("prune_and_link: one prediction vector per cluster");
    }
    const std::size_t n = clusters.size();
    detail::UnionFind uf(n);
    for (std::size_t c = 0; c < n; ++c) {
        const ClusterInstance& inst = clusters[c];
        const auto& y = predictions[c];
        if (y.size() != inst.members.size()) {
            throw contract_error("prune_and_link: prediction length != member count");
        }
        for (std::size_t h = 0; h < inst.members.size(); ++h) {
            if (inst.members[h] >= n || inst.center >= n) {
                throw index_error("prune_and_link: member index out of range");
            }
            if (inst.members[h] == inst.center || y[h] >= tau) {
                uf.unite(inst.center, inst.members[h]);
            }
        }
    }
    std::vector<std::uint32_t> labels(n);
    std::vector<std::int64_t> canonical(n, -1);
    std::uint32_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t root = uf.find(static_cast<std::uint32_t>(i));
        if (canonical[root] < 0) {
            canonical[root] = next++;
        }
        labels[i] = static_cast<std::uint32_t>(canonical[root]);
    }
    return labels;
}

} // namespace qclus
