#pragma once

// Synthetic embedding generator. Class centroids are drawn on the unit
// hypersphere with a minimum pairwise angular separation (rejection sampling);
// samples perturb their centroid by Gaussian noise in the tangent plane and
// are renormalized. A stand-in for real embedding dumps that keeps cluster
// difficulty controllable through a single angular noise knob.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "qclus/clusterset.hpp"
#include "qclus/errors.hpp"
#include "qclus/matrix.hpp"
#include "qclus/util.hpp"

namespace qclus {

struct SynthSpec {
    std::size_t n_classes = 1;
    std::size_t samples_per_class = 1;
    std::size_t dim = 2;
    double sigma = 0.0;    // intra-class angular noise scale, radians
    double min_sep = 0.0;  // smallest allowed centroid pair angle, radians
    std::uint64_t seed = 0;

    void validate() const {
        if (n_classes < 1 || samples_per_class < 1) {
            throw config_error("synth spec: class and sample counts must be >= 1");
        }
        if (dim < 2) {
            throw config_error("synth spec: dim must be >= 2");
        }
        if (!(sigma >= 0.0)) {
            throw config_error("synth spec: sigma must be >= 0");
        }
        if (!(min_sep >= 0.0) || min_sep > std::numbers::pi) {
            throw config_error("synth spec: min separation must lie in [0, pi]");
        }
    }
};

namespace detail {

inline std::vector<double> random_unit_vector(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(d);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (double& x : v) {
            x = gauss(rng);
            norm2 += x * x;
        }
    } while (norm2 < 1e-24);
    const double norm = std::sqrt(norm2);
    for (double& x : v) {
        x /= norm;
    }
    return v;
}

inline double unit_angle(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        dot += a[j] * b[j];
    }
    return std::acos(std::clamp(dot, -1.0, 1.0));
}

} // namespace detail

inline FeatureSet synth_blobs(const SynthSpec& spec) {
    spec.validate();
    auto rng = make_rng(spec.seed);

    constexpr std::size_t kMaxAttempts = 100000;
    std::vector<std::vector<double>> centroids;
    centroids.reserve(spec.n_classes);
    std::size_t attempts = 0;
    while (centroids.size() < spec.n_classes) {
        if (++attempts > kMaxAttempts) {
            throw config_error(
                "synth_blobs: could not place " + std::to_string(spec.n_classes) +
                " centroids at separation >= " + std::to_string(spec.min_sep) +
                " rad in dim " + std::to_string(spec.dim) + " after " +
                std::to_string(kMaxAttempts) + " attempts");
        }
        auto cand = detail::random_unit_vector(spec.dim, rng);
        bool ok = true;
        for (const auto& c : centroids) {
            if (detail::unit_angle(cand, c) < spec.min_sep) {
                ok = false;
                break;
            }
        }
        if (ok) {
            centroids.push_back(std::move(cand));
        }
    }

    const std::size_t n = spec.n_classes * spec.samples_per_class;
    FeatureSet out;
    out.features = Matrix(n, spec.dim);
    out.labels = std::vector<std::uint32_t>(n);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::size_t row = 0;
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        const auto& center = centroids[c];
        for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
            (*out.labels)[row] = static_cast<std::uint32_t>(c);
            auto dst = out.features.row(row);
            if (spec.sigma == 0.0) {
                std::copy(center.begin(), center.end(), dst.begin());
                continue;
            }
            std::vector<double> g(spec.dim);
            double radial = 0.0;
            for (std::size_t j = 0; j < spec.dim; ++j) {
                g[j] = gauss(rng);
                radial += g[j] * center[j];
            }
            double norm2 = 0.0;
            for (std::size_t j = 0; j < spec.dim; ++j) {
                const double tangent = g[j] - radial * center[j];
                dst[j] = center[j] + spec.sigma * tangent;
                norm2 += dst[j] * dst[j];
            }
            const double norm = std::sqrt(norm2);
            for (std::size_t j = 0; j < spec.dim; ++j) {
                dst[j] /= norm;
            }
        }
    }
    return out;
}

} // namespace qclus
