#ifndef ISCHED_CLUSTERING_HPP
#define ISCHED_CLUSTERING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "isched/error.hpp"

namespace isched {

using FeatureVector = std::vector<double>;

/// Seed-based k-means model over a selected subset of feature columns.
///
/// Centroid c lives in the reduced space (one coordinate per entry of
/// `feature_indices`) and is the running mean of the `counts[c]` points
/// averaged into it so far, seeds included.
struct ClusterModel {
    std::vector<FeatureVector> centroids;
    std::vector<std::size_t> counts;
    std::vector<std::size_t> feature_indices;
    std::vector<int> labels;

    std::size_t n_clusters() const { return centroids.size(); }
    std::size_t dimension() const { return feature_indices.size(); }

    /// Smallest full-space vector length accepted by assign().
    std::size_t required_input_size() const {
        return feature_indices.empty()
                   ? 0
                   : *std::max_element(feature_indices.begin(), feature_indices.end()) + 1;
    }

    void validate() const {
        detail::require(centroids.size() >= 2, "a cluster model needs at least 2 centroids");
        detail::require(counts.size() == centroids.size() && labels.size() == centroids.size(),
                        "centroids, counts and labels must have equal length");
        detail::require(!feature_indices.empty(), "feature_indices is empty");
        std::vector<std::size_t> sorted = feature_indices;
        std::sort(sorted.begin(), sorted.end());
        detail::require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(),
                        "feature_indices must be distinct");
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            detail::require(centroids[c].size() == feature_indices.size(),
                            "centroid " + std::to_string(c) + " has the wrong dimension");
            detail::require(counts[c] >= 1, "centroid counts must be >= 1");
            for (double v : centroids[c]) {
                detail::require(std::isfinite(v), "centroid values must be finite");
            }
        }
    }
};

/// Nearest/second-nearest centroid distances; utility = d_b - d_a.
struct Assignment {
    std::size_t nearest = 0;
    double d_a = 0.0;
    double d_b = 0.0;
    double utility = 0.0;
};

struct Chi2Scores {
    std::vector<double> scores;
    /// Amount added to each feature before scoring (non-zero only for features with negative values).
    std::vector<double> shifts;
};

/// Chi-squared score per feature column, treating features as per-class frequency mass.
///
/// score[j] = sum_c (O_cj - E_cj)^2 / E_cj, O_cj the class-c sum of column j and
/// E_cj = (n_c / n) * total_j. Columns containing negative values are shifted
/// by their minimum first; all-zero columns score 0.
inline Chi2Scores chi2_scores(std::span<const FeatureVector> features, std::span<const int> labels) {
    detail::require(features.size() >= 2, "chi-squared scoring needs at least 2 samples");
    detail::require(features.size() == labels.size(), "one label per sample required");
    const std::size_t d = features.front().size();
    detail::require(d >= 1, "samples must have at least one feature");
    for (const auto& row : features) {
        detail::require(row.size() == d, "all samples must have the same dimension");
        for (double v : row) {
            detail::require(std::isfinite(v), "features must be finite");
        }
    }

    std::map<int, std::size_t> class_index;
    for (int label : labels) {
        class_index.emplace(label, 0);
    }
    detail::require(class_index.size() >= 2, "chi-squared scoring needs at least 2 classes");
    std::size_t next = 0;
    for (auto& [label, idx] : class_index) {
        idx = next++;
    }
    const std::size_t n_classes = class_index.size();

    Chi2Scores out;
    out.shifts.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double lo = 0.0;
        for (const auto& row : features) {
            lo = std::min(lo, row[j]);
        }
        out.shifts[j] = -lo;
    }

    std::vector<std::size_t> class_size(n_classes, 0);
    std::vector<std::vector<double>> observed(n_classes, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < features.size(); ++i) {
        const std::size_t c = class_index.at(labels[i]);
        ++class_size[c];
        for (std::size_t j = 0; j < d; ++j) {
            observed[c][j] += features[i][j] + out.shifts[j];
        }
    }

    const double n = static_cast<double>(features.size());
    out.scores.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double total = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            total += observed[c][j];
        }
        if (total == 0.0) {
            continue;
        }
        double score = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            const double expected = static_cast<double>(class_size[c]) / n * total;
            const double diff = observed[c][j] - expected;
            score += diff * diff / expected;
        }
        out.scores[j] = score;
    }
    return out;
}

/// Indices of the k largest scores, highest first; equal scores keep the lower index first.
inline std::vector<std::size_t> select_top_k(std::span<const double> scores, std::size_t k) {
    detail::require(k >= 1 && k <= scores.size(),
                    "k must lie in [1, " + std::to_string(scores.size()) + "]");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(k);
    return order;
}

/// Labeled seeds for one class, in the full feature space.
struct SeedGroup {
    int label = 0;
    std::vector<FeatureVector> seeds;
};

inline FeatureVector restrict_features(const FeatureVector& x, std::span<const std::size_t> indices) {
    FeatureVector out;
    out.reserve(indices.size());
    for (std::size_t idx : indices) {
        detail::require(idx < x.size(), "feature index " + std::to_string(idx) +
                                            " outside a vector of size " + std::to_string(x.size()));
        out.push_back(x[idx]);
    }
    return out;
}

/// One centroid per class: the mean of that class's seeds restricted to `feature_indices`.
inline ClusterModel init_seeded(std::span<const SeedGroup> groups, std::vector<std::size_t> feature_indices) {
    detail::require(groups.size() >= 2, "seeded k-means needs at least 2 classes");
    ClusterModel model;
    model.feature_indices = std::move(feature_indices);
    for (const auto& group : groups) {
        detail::require(!group.seeds.empty(),
                        "class " + std::to_string(group.label) + " has no seeds");
        FeatureVector centroid(model.feature_indices.size(), 0.0);
        for (const auto& seed : group.seeds) {
            const FeatureVector r = restrict_features(seed, model.feature_indices);
            for (std::size_t j = 0; j < r.size(); ++j) {
                centroid[j] += r[j];
            }
        }
        for (double& v : centroid) {
            v /= static_cast<double>(group.seeds.size());
        }
        model.centroids.push_back(std::move(centroid));
        model.counts.push_back(group.seeds.size());
        model.labels.push_back(group.label);
    }
    model.validate();
    return model;
}

inline double manhattan(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        d += std::abs(a[j] - b[j]);
    }
    return d;
}

/// L1 distance to every centroid; ties resolve to the lower centroid index.
inline Assignment assign(const ClusterModel& model, const FeatureVector& x) {
    detail::require(model.n_clusters() >= 2, "model needs at least 2 centroids");
    detail::require(x.size() >= model.required_input_size(),
                    "sample has " + std::to_string(x.size()) + " features, model needs " +
                        std::to_string(model.required_input_size()));
    const FeatureVector r = restrict_features(x, model.feature_indices);

    Assignment a;
    a.d_a = std::numeric_limits<double>::infinity();
    a.d_b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < model.n_clusters(); ++c) {
        const double d = manhattan(r, model.centroids[c]);
        if (d < a.d_a) {
            a.d_b = a.d_a;
            a.d_a = d;
            a.nearest = c;
        } else if (d < a.d_b) {
            a.d_b = d;
        }
    }
    a.utility = a.d_b - a.d_a;
    return a;
}

inline double utility_of(const ClusterModel& model, const FeatureVector& x) {
    return assign(model, x).utility;
}

/// Running-mean update of the assigned centroid: k adds, k multiplies, k divides.
inline void update_centroid_in_place(ClusterModel& model, const Assignment& assignment,
                                     const FeatureVector& x) {
    detail::require(assignment.nearest < model.n_clusters(), "assignment refers to no centroid");
    const FeatureVector r = restrict_features(x, model.feature_indices);
    auto& centroid = model.centroids[assignment.nearest];
    auto& count = model.counts[assignment.nearest];
    ++count;
    const double n = static_cast<double>(count);
    for (std::size_t j = 0; j < centroid.size(); ++j) {
        centroid[j] += (r[j] - centroid[j]) / n;
    }
}

inline ClusterModel update_centroid(ClusterModel model, const Assignment& assignment,
                                    const FeatureVector& x) {
    update_centroid_in_place(model, assignment, x);
    return model;
}

}  // namespace isched

#endif  // ISCHED_CLUSTERING_HPP
