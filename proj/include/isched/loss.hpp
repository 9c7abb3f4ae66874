#ifndef ISCHED_LOSS_HPP
#define ISCHED_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "isched/clustering.hpp"
#include "isched/error.hpp"

namespace isched {

/// Convex per-layer weights: non-negative, summing to 1.
class LayerWeights {
public:
    explicit LayerWeights(std::vector<double> alpha) : alpha_(std::move(alpha)) {
        detail::require(!alpha_.empty(), "layer weights need at least one layer");
        double sum = 0.0;
        for (double a : alpha_) {
            detail::require(std::isfinite(a) && a >= 0.0, "layer weights must be >= 0");
            sum += a;
        }
        detail::require(std::abs(sum - 1.0) <= 1e-12, "layer weights must sum to 1");
    }

    std::size_t size() const { return alpha_.size(); }
    double operator[](std::size_t i) const { return alpha_[i]; }
    std::span<const double> values() const { return alpha_; }

private:
    std::vector<double> alpha_;
};

/// alpha_i proportional to (L - i + 1): early layers weigh more.
inline LayerWeights default_alpha(std::size_t layers) {
    detail::require(layers >= 1, "need at least one layer");
    const double norm = static_cast<double>(layers * (layers + 1)) / 2.0;
    std::vector<double> alpha(layers);
    for (std::size_t i = 0; i < layers; ++i) {
        alpha[i] = static_cast<double>(layers - i) / norm;
    }
    return LayerWeights(std::move(alpha));
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    detail::require(a.size() == b.size(), "representations must have equal dimension");
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        d += diff * diff;
    }
    return d;
}

/// Contrastive loss of one pair with D = ||r1 - r2||^2:
/// same class -> D/2, different class -> max(0, delta - D)/2.
inline double contrastive_pair(std::span<const double> r1, std::span<const double> r2, bool same_class,
                               double delta) {
    detail::require(delta > 0.0, "margin delta must be > 0");
    const double d = squared_distance(r1, r2);
    return same_class ? 0.5 * d : 0.5 * std::max(0.0, delta - d);
}

struct RepresentationPair {
    FeatureVector a;
    FeatureVector b;
    bool same_class = false;
};

/// All pairs at one layer.
struct PairBatch {
    std::vector<RepresentationPair> pairs;
};

/// Every unordered pair of points in one layer's batch.
inline PairBatch all_pairs(std::span<const FeatureVector> reps, std::span<const int> labels) {
    detail::require(reps.size() == labels.size(), "one label per representation required");
    PairBatch batch;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        for (std::size_t j = i + 1; j < reps.size(); ++j) {
            batch.pairs.push_back({reps[i], reps[j], labels[i] == labels[j]});
        }
    }
    return batch;
}

inline double mean_contrastive(const PairBatch& batch, double delta) {
    detail::require(!batch.pairs.empty(), "a layer batch needs at least one pair");
    double total = 0.0;
    for (const auto& p : batch.pairs) {
        total += contrastive_pair(p.a, p.b, p.same_class, delta);
    }
    return total / static_cast<double>(batch.pairs.size());
}

/// sum_i alpha_i * (mean contrastive loss over layer i's pairs).
inline double layer_aware_loss(std::span<const PairBatch> layers, const LayerWeights& weights,
                               double delta) {
    detail::require(layers.size() == weights.size(),
                    "got " + std::to_string(layers.size()) + " layers for " +
                        std::to_string(weights.size()) + " weights");
    double loss = 0.0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        loss += weights[i] * mean_contrastive(layers[i], delta);
    }
    return loss;
}

struct PairGradient {
    FeatureVector d_a;
    FeatureVector d_b;
};

/// Gradient of layer_aware_loss w.r.t. every representation, pair by pair.
///
/// Different-class pairs exactly at D == delta take the zero side of the hinge.
inline std::vector<std::vector<PairGradient>> layer_aware_gradient(std::span<const PairBatch> layers,
                                                                   const LayerWeights& weights,
                                                                   double delta) {
    detail::require(layers.size() == weights.size(), "layer count does not match weight count");
    detail::require(delta > 0.0, "margin delta must be > 0");
    std::vector<std::vector<PairGradient>> grads(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& pairs = layers[i].pairs;
        detail::require(!pairs.empty(), "a layer batch needs at least one pair");
        const double scale = weights[i] / static_cast<double>(pairs.size());
        grads[i].reserve(pairs.size());
        for (const auto& p : pairs) {
            const double d = squared_distance(p.a, p.b);
            // d(D/2)/da = (a - b); d(max(0, delta - D)/2)/da = -(a - b) inside the margin.
            double coeff = 0.0;
            if (p.same_class) {
                coeff = scale;
            } else if (d < delta) {
                coeff = -scale;
            }
            PairGradient g{FeatureVector(p.a.size()), FeatureVector(p.a.size())};
            for (std::size_t j = 0; j < p.a.size(); ++j) {
                g.d_a[j] = coeff * (p.a[j] - p.b[j]);
                g.d_b[j] = -g.d_a[j];
            }
            grads[i].push_back(std::move(g));
        }
    }
    return grads;
}

/// Free per-layer embeddings: points[layer][i] is sample i's representation at that layer.
struct EmbeddingSet {
    std::vector<std::vector<FeatureVector>> points;
    std::vector<int> labels;
};

inline std::vector<PairBatch> embedding_batches(const EmbeddingSet& set) {
    std::vector<PairBatch> layers;
    layers.reserve(set.points.size());
    for (const auto& layer : set.points) {
        layers.push_back(all_pairs(layer, set.labels));
    }
    return layers;
}

/// Plain gradient descent on layer_aware_loss over all within-layer pairs.
/// Returns the loss after each step.
inline std::vector<double> fit_embeddings(EmbeddingSet& set, const LayerWeights& weights, double delta,
                                          double learning_rate, std::size_t steps) {
    detail::require(set.points.size() == weights.size(), "layer count does not match weight count");
    detail::require(learning_rate > 0.0, "learning rate must be > 0");
    std::vector<double> history;
    history.reserve(steps);
    for (std::size_t step = 0; step < steps; ++step) {
        const auto layers = embedding_batches(set);
        const auto grads = layer_aware_gradient(layers, weights, delta);
        for (std::size_t l = 0; l < set.points.size(); ++l) {
            auto& pts = set.points[l];
            std::vector<FeatureVector> acc(pts.size(), FeatureVector(pts.front().size(), 0.0));
            std::size_t k = 0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                for (std::size_t j = i + 1; j < pts.size(); ++j, ++k) {
                    for (std::size_t c = 0; c < acc[i].size(); ++c) {
                        acc[i][c] += grads[l][k].d_a[c];
                        acc[j][c] += grads[l][k].d_b[c];
                    }
                }
            }
            for (std::size_t i = 0; i < pts.size(); ++i) {
                for (std::size_t c = 0; c < pts[i].size(); ++c) {
                    pts[i][c] -= learning_rate * acc[i][c];
                }
            }
        }
        history.push_back(layer_aware_loss(embedding_batches(set), weights, delta));
    }
    return history;
}

}  // namespace isched

#endif  // ISCHED_LOSS_HPP
