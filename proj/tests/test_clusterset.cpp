#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "qclus/clusterset.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace qclus;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double kPi = std::numbers::pi;

FeatureSet random_features(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    FeatureSet f;
    f.features = Matrix(n, d);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : f.features.data()) {
        v = gauss(rng);
    }
    return f;
}

} // namespace

TEST_CASE("knn with k equal to N includes every sample", "[clusterset]") {
    std::mt19937_64 rng(3);
    auto f = random_features(6, 4, rng);
    auto clusters = knn_clusters(f, 6);
    REQUIRE(clusters.size() == 6);
    for (const auto& c : clusters) {
        REQUIRE(c.members.size() == 6);
        std::vector<bool> seen(6, false);
        for (auto m : c.members) {
            REQUIRE_FALSE(seen[m]);
            seen[m] = true;
        }
        REQUIRE(c.members[0] == c.center);
        REQUIRE(c.sims[0] == 1.0);
        for (std::size_t h = 1; h < c.sims.size(); ++h) {
            REQUIRE(c.sims[h] <= c.sims[h - 1]);
        }
    }
}

TEST_CASE("knn on orthonormal rows with k=1", "[clusterset]") {
    FeatureSet f;
    f.features = Matrix(4, 4);
    for (std::size_t i = 0; i < 4; ++i) {
        f.features(i, i) = 1.0;
    }
    auto clusters = knn_clusters(f, 1);
    for (std::size_t i = 0; i < 4; ++i) {
        REQUIRE(clusters[i].members == std::vector<std::uint32_t>{static_cast<std::uint32_t>(i)});
        REQUIRE(clusters[i].sims == std::vector<double>{1.0});
    }
}

TEST_CASE("knn hand fixture on the unit circle", "[clusterset]") {
    // Points at 0, 10, and 90 degrees. All pairwise cosines by hand:
    // cos(10deg) ~ 0.9848, cos(80deg) ~ 0.1736, cos(90deg) = 0.
    const double ten = 10.0 * kPi / 180.0;
    FeatureSet f;
    f.features = Matrix::from_rows({{1.0, 0.0},
                                    {std::cos(ten), std::sin(ten)},
                                    {0.0, 1.0}});
    auto clusters = knn_clusters(f, 2);
    REQUIRE(clusters[0].members == std::vector<std::uint32_t>{0, 1});
    REQUIRE_THAT(clusters[0].sims[0], WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(clusters[0].sims[1], WithinAbs(std::cos(ten), 1e-12));
    REQUIRE(clusters[1].members == std::vector<std::uint32_t>{1, 0});
    REQUIRE(clusters[2].members == std::vector<std::uint32_t>{2, 1});
}

TEST_CASE("knn matches the selection oracle including ties", "[clusterset]") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 12 + trial;
        auto f = random_features(n, 5, rng);
        // Plant exact duplicates and scaled copies to force similarity ties.
        for (std::size_t j = 0; j < 5; ++j) {
            f.features(1, j) = f.features(0, j);
            f.features(2, j) = 2.0 * f.features(0, j);
        }
        const std::size_t k = 1 + trial % n;
        auto clusters = knn_clusters(f, k);

        std::vector<std::vector<double>> rows(n);
        for (std::size_t i = 0; i < n; ++i) {
            rows[i].assign(f.features.row(i).begin(), f.features.row(i).end());
        }
        auto want = oracle::knn_bruteforce(rows, k);
        for (std::size_t i = 0; i < n; ++i) {
            REQUIRE(clusters[i].members == want[i]);
        }
    }
}

TEST_CASE("knn masks follow labels and always keep the center", "[clusterset]") {
    std::mt19937_64 rng(11);
    auto f = random_features(10, 4, rng);
    f.labels = std::vector<std::uint32_t>{0, 0, 1, 1, 1, 0, 2, 2, 0, 1};
    auto clusters = knn_clusters(f, 5);
    for (const auto& c : clusters) {
        REQUIRE(c.mask.size() == 5);
        REQUIRE(c.mask[0] == 1);
        for (std::size_t h = 0; h < 5; ++h) {
            const bool same =
                (*f.labels)[c.members[h]] == (*f.labels)[c.center];
            REQUIRE(c.mask[h] == (same ? 1 : 0));
        }
    }
}

TEST_CASE("knn input validation", "[clusterset]") {
    std::mt19937_64 rng(13);
    auto f = random_features(4, 3, rng);
    REQUIRE_THROWS_AS(knn_clusters(f, 5), contract_error);
    REQUIRE_THROWS_AS(knn_clusters(f, 0), contract_error);

    auto zero_row = f;
    for (std::size_t j = 0; j < 3; ++j) {
        zero_row.features(2, j) = 0.0;
    }
    REQUIRE_THROWS_AS(knn_clusters(zero_row, 2), degenerate_input_error);

    auto bad_labels = f;
    bad_labels.labels = std::vector<std::uint32_t>{1, 2};
    REQUIRE_THROWS_AS(knn_clusters(bad_labels, 2), contract_error);
}

TEST_CASE("knn is deterministic", "[clusterset]") {
    std::mt19937_64 rng(17);
    auto f = random_features(15, 6, rng);
    auto a = knn_clusters(f, 7);
    auto b = knn_clusters(f, 7, 2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].members == b[i].members);
        REQUIRE(a[i].sims == b[i].sims);
    }
}

TEST_CASE("similarity encoding in both modes", "[clusterset]") {
    ClusterInstance c;
    c.center = 2;
    c.members = {2, 0, 3};
    c.sims = {1.0, 0.8, 0.25};

    auto shared = similarity_encoding(c, FusionMode::Shared);
    REQUIRE(shared.rows() == 3);
    REQUIRE(shared.cols() == 3);
    for (std::size_t h = 0; h < 3; ++h) {
        for (std::size_t j = 0; j < 3; ++j) {
            REQUIRE(shared(h, j) == c.sims[j]);
        }
    }

    auto per_pos = similarity_encoding(c, FusionMode::PerPosition);
    REQUIRE(per_pos.rows() == 3);
    REQUIRE(per_pos.cols() == 1);
    for (std::size_t h = 0; h < 3; ++h) {
        REQUIRE(per_pos(h, 0) == c.sims[h]);
    }

    ClusterInstance lone;
    lone.center = 0;
    lone.members = {0};
    lone.sims = {1.0};
    REQUIRE(similarity_encoding(lone, FusionMode::Shared) ==
            similarity_encoding(lone, FusionMode::PerPosition));
    REQUIRE(similarity_encoding(lone, FusionMode::Shared)(0, 0) == 1.0);
}

TEST_CASE("per-position similarities match an independent recomputation", "[clusterset]") {
    std::mt19937_64 rng(19);
    auto f = random_features(8, 4, rng);
    auto clusters = knn_clusters(f, 4);
    for (const auto& c : clusters) {
        auto e = similarity_encoding(c, FusionMode::PerPosition);
        for (std::size_t h = 0; h < 4; ++h) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t j = 0; j < 4; ++j) {
                dot += f.features(c.center, j) * f.features(c.members[h], j);
                na += f.features(c.center, j) * f.features(c.center, j);
                nb += f.features(c.members[h], j) * f.features(c.members[h], j);
            }
            REQUIRE_THAT(e(h, 0), WithinAbs(dot / std::sqrt(na * nb), 1e-12));
        }
    }
}

TEST_CASE("token fusion", "[clusterset]") {
    std::mt19937_64 rng(23);
    auto f = random_features(6, 4, rng);
    auto clusters = knn_clusters(f, 3);
    const auto& c = clusters[0];

    SECTION("zero W_e returns raw neighbor features") {
        Matrix w(3, 4);
        for (FusionMode mode : {FusionMode::Shared, FusionMode::PerPosition}) {
            auto s = fuse_tokens(c, f, w, mode);
            for (std::size_t h = 0; h < 3; ++h) {
                for (std::size_t j = 0; j < 4; ++j) {
                    REQUIRE(s(h, j) == f.features(c.members[h], j));
                }
            }
        }
    }
    SECTION("per-position one-hot rows shift coordinate h") {
        ClusterInstance unit = c;
        unit.sims = {1.0, 1.0, 1.0};
        const double beta = 0.7;
        Matrix w(3, 4);
        for (std::size_t h = 0; h < 3; ++h) {
            w(h, h) = beta;
        }
        auto s = fuse_tokens(unit, f, w, FusionMode::PerPosition);
        for (std::size_t h = 0; h < 3; ++h) {
            for (std::size_t j = 0; j < 4; ++j) {
                const double want =
                    f.features(unit.members[h], j) + (h == j ? beta : 0.0);
                REQUIRE_THAT(s(h, j), WithinAbs(want, 1e-15));
            }
        }
    }
    SECTION("modes differ on non-constant sims") {
        Matrix w(3, 4);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (double& v : w.data()) {
            v = gauss(rng);
        }
        REQUIRE(c.sims[0] != c.sims[1]); // random features: strict ordering
        auto a = fuse_tokens(c, f, w, FusionMode::Shared);
        auto b = fuse_tokens(c, f, w, FusionMode::PerPosition);
        REQUIRE_FALSE(a == b);
    }
    SECTION("shape validation") {
        Matrix bad(2, 4);
        REQUIRE_THROWS_AS(fuse_tokens(c, f, bad, FusionMode::Shared), contract_error);
    }
}

TEST_CASE("fusion backward matches finite differences", "[clusterset]") {
    std::mt19937_64 rng(29);
    auto f = random_features(6, 4, rng);
    auto clusters = knn_clusters(f, 3);
    const auto& c = clusters[1];
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (FusionMode mode : {FusionMode::Shared, FusionMode::PerPosition}) {
        Matrix w(3, 4);
        for (double& v : w.data()) {
            v = gauss(rng);
        }
        Matrix upstream(3, 4);
        for (double& v : upstream.data()) {
            v = gauss(rng);
        }
        auto d_w = fuse_tokens_backward(c, upstream, mode);

        const double h = 1e-6;
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t j = 0; j < 4; ++j) {
                auto loss = [&](const Matrix& wm) {
                    auto s = fuse_tokens(c, f, wm, mode);
                    double l = 0.0;
                    for (std::size_t i = 0; i < s.data().size(); ++i) {
                        l += s.data()[i] * upstream.data()[i];
                    }
                    return l;
                };
                auto wp = w, wm2 = w;
                wp(r, j) += h;
                wm2(r, j) -= h;
                REQUIRE_THAT(d_w(r, j),
                             WithinAbs((loss(wp) - loss(wm2)) / (2 * h), 1e-6));
            }
        }
    }
}

TEST_CASE("prune_and_link basics", "[clusterset]") {
    std::mt19937_64 rng(31);
    auto f = random_features(5, 3, rng);
    auto clusters = knn_clusters(f, 5);

    SECTION("all ones links everything") {
        std::vector<std::vector<double>> preds(5, std::vector<double>(5, 1.0));
        auto labels = prune_and_link(clusters, preds, 0.5);
        for (auto l : labels) {
            REQUIRE(l == 0);
        }
    }
    SECTION("all below tau leaves singletons") {
        std::vector<std::vector<double>> preds(5, std::vector<double>(5, 0.1));
        auto labels = prune_and_link(clusters, preds, 0.5);
        for (std::size_t i = 0; i < 5; ++i) {
            REQUIRE(labels[i] == i);
        }
    }
    SECTION("tau validation") {
        std::vector<std::vector<double>> preds(5, std::vector<double>(5, 1.0));
        REQUIRE_THROWS_AS(prune_and_link(clusters, preds, 0.0), contract_error);
        REQUIRE_THROWS_AS(prune_and_link(clusters, preds, 1.0), contract_error);
        REQUIRE_THROWS_AS(prune_and_link(clusters, {}, 0.5), contract_error);
    }
}

TEST_CASE("prune_and_link separates two clean blobs", "[clusterset]") {
    // Two well-separated directions, five samples each.
    std::mt19937_64 rng(37);
    std::normal_distribution<double> noise(0.0, 0.01);
    FeatureSet f;
    f.features = Matrix(10, 2);
    for (std::size_t i = 0; i < 10; ++i) {
        const bool first = i < 5;
        f.features(i, 0) = (first ? 1.0 : 0.0) + noise(rng);
        f.features(i, 1) = (first ? 0.0 : 1.0) + noise(rng);
    }
    f.labels = std::vector<std::uint32_t>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    auto clusters = knn_clusters(f, 4);

    // Perfect predictions: keep exactly the same-label members.
    std::vector<std::vector<double>> preds;
    for (const auto& c : clusters) {
        std::vector<double> y;
        for (std::size_t h = 0; h < c.members.size(); ++h) {
            y.push_back(c.mask[h] ? 0.9 : 0.1);
        }
        preds.push_back(std::move(y));
    }
    auto labels = prune_and_link(clusters, preds, 0.5);
    for (std::size_t i = 0; i < 10; ++i) {
        REQUIRE(labels[i] == (i < 5 ? 0 : 1));
    }
}

TEST_CASE("prune_and_link output is a partition", "[clusterset]") {
    std::mt19937_64 rng(41);
    auto f = random_features(20, 4, rng);
    auto clusters = knn_clusters(f, 6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> preds;
    for (std::size_t i = 0; i < 20; ++i) {
        std::vector<double> y(6);
        for (double& v : y) {
            v = u(rng);
        }
        preds.push_back(std::move(y));
    }
    auto labels = prune_and_link(clusters, preds, 0.5);
    REQUIRE(labels.size() == 20);
    // Labels are contiguous from 0 in first-appearance order.
    std::uint32_t max_seen = 0;
    for (auto l : labels) {
        REQUIRE(l <= max_seen + 1);
        max_seen = std::max(max_seen, l);
    }
    REQUIRE(labels[0] == 0);
}
