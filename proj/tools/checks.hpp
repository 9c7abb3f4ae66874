#ifndef ISCHED_TOOLS_CHECKS_HPP
#define ISCHED_TOOLS_CHECKS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "isched/clustering.hpp"
#include "isched/generators.hpp"
#include "isched/loss.hpp"
#include "oracles.hpp"

namespace isched::checks {

struct LossCheckResult {
    std::size_t batches = 0;
    double max_relative_error = 0.0;
};

/// Random multi-layer pair batches with no different-class pair near the hinge.
inline std::vector<PairBatch> random_layers(std::mt19937_64& rng, double delta) {
    const auto layers = static_cast<std::size_t>(detail::uniform_int(rng, 1, 3));
    const auto dim = static_cast<std::size_t>(detail::uniform_int(rng, 1, 4));
    const auto pairs = static_cast<std::size_t>(detail::uniform_int(rng, 1, 5));
    std::normal_distribution<double> noise(0.0, 0.7);
    std::vector<PairBatch> out(layers);
    for (auto& batch : out) {
        while (batch.pairs.size() < pairs) {
            RepresentationPair p;
            p.same_class = detail::uniform01(rng) < 0.5;
            for (std::size_t j = 0; j < dim; ++j) {
                p.a.push_back(noise(rng));
                p.b.push_back(noise(rng));
            }
            if (!p.same_class && std::abs(squared_distance(p.a, p.b) - delta) < 1e-3) {
                continue;
            }
            batch.pairs.push_back(std::move(p));
        }
    }
    return out;
}

/// Analytic gradient of the layer-aware loss against central differences.
/// Error per batch is ||g - fd|| / max(||g||, ||fd||), zero when both vanish.
inline LossCheckResult run_loss_check(std::uint64_t seed, std::size_t batches, double delta = 1.0,
                                      double step = 1e-6) {
    std::mt19937_64 rng(seed);
    LossCheckResult res;
    for (std::size_t b = 0; b < batches; ++b) {
        auto layers = random_layers(rng, delta);
        const LayerWeights weights = default_alpha(layers.size());
        const auto grads = layer_aware_gradient(layers, weights, delta);

        double diff2 = 0.0;
        double g2 = 0.0;
        double fd2 = 0.0;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            for (std::size_t p = 0; p < layers[l].pairs.size(); ++p) {
                for (int side = 0; side < 2; ++side) {
                    auto& v = side == 0 ? layers[l].pairs[p].a : layers[l].pairs[p].b;
                    const auto& g = side == 0 ? grads[l][p].d_a : grads[l][p].d_b;
                    for (std::size_t j = 0; j < v.size(); ++j) {
                        const double keep = v[j];
                        v[j] = keep + step;
                        const double up = layer_aware_loss(layers, weights, delta);
                        v[j] = keep - step;
                        const double down = layer_aware_loss(layers, weights, delta);
                        v[j] = keep;
                        const double fd = (up - down) / (2.0 * step);
                        diff2 += (g[j] - fd) * (g[j] - fd);
                        g2 += g[j] * g[j];
                        fd2 += fd * fd;
                    }
                }
            }
        }
        const double scale = std::sqrt(std::max(g2, fd2));
        const double err = scale == 0.0 ? 0.0 : std::sqrt(diff2) / scale;
        res.max_relative_error = std::max(res.max_relative_error, err);
        ++res.batches;
    }
    return res;
}

struct ClusterCheckResult {
    std::size_t instances = 0;
    std::size_t mismatches = 0;
    std::string first_mismatch;
};

/// Random seeded models with small integer coordinates and counts of 2^m - 1,
/// so the running-mean update is exact in binary and must match the pooled mean bit for bit.
inline ClusterCheckResult run_cluster_check(std::uint64_t seed, std::size_t instances) {
    std::mt19937_64 rng(seed);
    ClusterCheckResult res;
    auto fail = [&](std::size_t i, const std::string& what) {
        if (res.mismatches++ == 0) {
            res.first_mismatch = "instance " + std::to_string(i) + ": " + what;
        }
    };
    for (std::size_t i = 0; i < instances; ++i, ++res.instances) {
        const auto n = static_cast<std::size_t>(detail::uniform_int(rng, 1, 5));
        const auto k = static_cast<std::size_t>(detail::uniform_int(rng, 2, 8));
        const std::size_t full = n + static_cast<std::size_t>(detail::uniform_int(rng, 0, 3));

        ClusterModel model;
        std::vector<std::size_t> cols(full);
        for (std::size_t j = 0; j < full; ++j) cols[j] = j;
        for (std::size_t j = full; j > 1; --j) {
            std::swap(cols[j - 1], cols[static_cast<std::size_t>(detail::uniform_int(rng, 0, static_cast<std::int64_t>(j) - 1))]);
        }
        model.feature_indices.assign(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(n));
        for (std::size_t c = 0; c < k; ++c) {
            FeatureVector centroid;
            for (std::size_t j = 0; j < n; ++j) {
                centroid.push_back(static_cast<double>(detail::uniform_int(rng, -4, 4)));
            }
            model.centroids.push_back(centroid);
            model.counts.push_back((std::size_t{1} << detail::uniform_int(rng, 1, 4)) - 1);
            model.labels.push_back(static_cast<int>(c));
        }
        FeatureVector x;
        for (std::size_t j = 0; j < full; ++j) {
            x.push_back(static_cast<double>(detail::uniform_int(rng, -4, 4)));
        }

        const Assignment a = assign(model, x);
        const FeatureVector r = restrict_features(x, model.feature_indices);
        const auto expect = oracle::nearest_two(model.centroids, r);
        if (a.nearest != expect.nearest || a.d_a != expect.d_a || a.d_b != expect.d_b) {
            fail(i, "assignment differs from the exhaustive nearest-two search");
            continue;
        }
        if (a.utility != expect.d_b - expect.d_a || utility_of(model, x) != a.utility) {
            fail(i, "utility differs from d_b - d_a");
            continue;
        }
        const ClusterModel updated = update_centroid(model, a, x);
        const auto pooled = oracle::pooled_mean(model.centroids[a.nearest], model.counts[a.nearest], r);
        if (updated.centroids[a.nearest] != pooled || updated.counts[a.nearest] != model.counts[a.nearest] + 1) {
            fail(i, "centroid update differs from the pooled mean");
            continue;
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (c != a.nearest && (updated.centroids[c] != model.centroids[c] || updated.counts[c] != model.counts[c])) {
                fail(i, "update touched a centroid other than the nearest");
                break;
            }
        }
    }
    return res;
}

}  // namespace isched::checks

#endif  // ISCHED_TOOLS_CHECKS_HPP
