#pragma once

// Clustering evaluation: Pairwise F-score via contingency-table counting and
// BCubed precision/recall/F, plus a literal O(N^2) pair enumeration used as
// an oracle against the optimized counts.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "qclus/errors.hpp"

namespace qclus {

using LabelVector = std::vector<std::uint32_t>;

struct PairwiseResult {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
    std::uint64_t tp = 0, fp = 0, fn = 0;
};

struct BCubedResult {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

struct MetricReport {
    PairwiseResult pairwise;
    BCubedResult bcubed;
};

namespace detail {

// Contingency table between two labelings: cell (g, p) counts samples with
// gt id g and pred id p, with ids compacted to dense indices.
struct Contingency {
    std::vector<std::size_t> gt_sizes, pred_sizes;
    std::unordered_map<std::uint64_t, std::size_t> cells;
    std::vector<std::size_t> gt_of, pred_of; // dense ids per sample

    Contingency(const LabelVector& gt, const LabelVector& pred) {
        if (gt.size() != pred.size()) {
            throw contract_error("metrics: label vectors differ in length");
        }
        std::unordered_map<std::uint32_t, std::size_t> gid, pid;
        gt_of.resize(gt.size());
        pred_of.resize(gt.size());
        for (std::size_t i = 0; i < gt.size(); ++i) {
            auto [git, gnew] = gid.try_emplace(gt[i], gid.size());
            auto [pit, pnew] = pid.try_emplace(pred[i], pid.size());
            gt_of[i] = git->second;
            pred_of[i] = pit->second;
            if (gnew) {
                gt_sizes.push_back(0);
            }
            if (pnew) {
                pred_sizes.push_back(0);
            }
            ++gt_sizes[git->second];
            ++pred_sizes[pit->second];
            ++cells[(static_cast<std::uint64_t>(git->second) << 32) | pit->second];
        }
    }

    std::size_t cell(std::size_t g, std::size_t p) const {
        auto it = cells.find((static_cast<std::uint64_t>(g) << 32) | p);
        return it == cells.end() ? 0 : it->second;
    }
};

inline std::uint64_t pairs(std::uint64_t n) { return n * (n - 1) / 2; }

} // namespace detail

// TP/FP/FN over all unordered sample pairs, by contingency-table counting.
inline PairwiseResult pairwise_f(const LabelVector& gt, const LabelVector& pred) {
    if (gt.size() < 2) {
        throw contract_error("pairwise_f: need at least 2 samples");
    }
    detail::Contingency table(gt, pred);
    std::uint64_t tp = 0;
    for (const auto& [key, count] : table.cells) {
        tp += detail::pairs(count);
    }
    std::uint64_t same_gt = 0, same_pred = 0;
    for (std::size_t s : table.gt_sizes) {
        same_gt += detail::pairs(s);
    }
    for (std::size_t s : table.pred_sizes) {
        same_pred += detail::pairs(s);
    }
    PairwiseResult r;
    r.tp = tp;
    r.fp = same_pred - tp;
    r.fn = same_gt - tp;
    r.precision = tp + r.fp == 0 ? 0.0
                                 : static_cast<double>(tp) /
                                       static_cast<double>(tp + r.fp);
    r.recall = tp + r.fn == 0 ? 0.0
                              : static_cast<double>(tp) /
                                    static_cast<double>(tp + r.fn);
    r.f = tp == 0 ? 0.0
                  : static_cast<double>(tp) /
                        std::sqrt(static_cast<double>(tp + r.fp) *
                                  static_cast<double>(tp + r.fn));
    return r;
}

// Per-point precision/recall with self-inclusion, averaged, then the
// harmonic mean.
inline BCubedResult bcubed_f(const LabelVector& gt, const LabelVector& pred) {
    if (gt.empty()) {
        throw contract_error("bcubed_f: empty label vectors");
    }
    detail::Contingency table(gt, pred);
    double psum = 0.0, rsum = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const std::size_t g = table.gt_of[i];
        const std::size_t p = table.pred_of[i];
        const double both = static_cast<double>(table.cell(g, p));
        psum += both / static_cast<double>(table.pred_sizes[p]);
        rsum += both / static_cast<double>(table.gt_sizes[g]);
    }
    BCubedResult r;
    r.precision = psum / static_cast<double>(gt.size());
    r.recall = rsum / static_cast<double>(gt.size());
    r.f = r.precision + r.recall == 0.0
              ? 0.0
              : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

struct PairCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0;
};

// Literal double loop over all pairs; the validation oracle for pairwise_f.
inline PairCounts pair_oracle(const LabelVector& gt, const LabelVector& pred) {
    if (gt.size() != pred.size()) {
        throw contract_error("pair_oracle: label vectors differ in length");
    }
    PairCounts c;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        for (std::size_t j = i + 1; j < gt.size(); ++j) {
            const bool same_gt = gt[i] == gt[j];
            const bool same_pred = pred[i] == pred[j];
            if (same_gt && same_pred) {
                ++c.tp;
            } else if (!same_gt && same_pred) {
                ++c.fp;
            } else if (same_gt && !same_pred) {
                ++c.fn;
            }
        }
    }
    return c;
}

inline MetricReport evaluate_labels(const LabelVector& gt, const LabelVector& pred) {
    MetricReport report;
    report.pairwise = pairwise_f(gt, pred);
    report.bcubed = bcubed_f(gt, pred);
    return report;
}

} // namespace qclus
