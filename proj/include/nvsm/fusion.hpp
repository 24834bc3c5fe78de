#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvsm/errors.hpp"
#include "nvsm/eval.hpp"
#include "nvsm/matrix.hpp"
#include "nvsm/ranking.hpp"
#include "nvsm/rng.hpp"
#include "nvsm/trec.hpp"

namespace nvsm {

inline constexpr double kDefaultGridStep = 0.0125;

struct FusionQuery {
    std::string query_id;
    std::vector<std::string> terms;
};

// A ranker joining the fusion: contributes its top-k list to the candidate
// pool and a value for any pooled (query, doc). A missing value (nullopt or
// a thrown data/numeric error) falls back to the feature's per-query
// minimum, i.e. 0 after normalization.
struct FeatureProvider {
    std::string name;
    std::function<RankedList(const FusionQuery&)> top_k;
    std::function<std::optional<double>(const FusionQuery&, const std::string& doc_name)> value;
};

// Per-query normalized feature values over the pooled candidates.
struct QueryFeatures {
    std::string query_id;
    std::vector<std::string> candidates;
    Matrix values;  // candidates x features, each column min-max scaled
};

using FeatureMatrix = std::vector<QueryFeatures>;

// Min-max scaling; a constant column maps to all zeros.
inline std::vector<double> normalize_per_query(std::span<const double> values) {
    if (values.empty()) throw UsageError("normalize_per_query: no values");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    std::vector<double> out(values.size(), 0.0);
    if (range == 0.0) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) / range;
    return out;
}

inline FeatureMatrix build_feature_matrix(std::span<const FusionQuery> queries,
                                          std::span<const FeatureProvider> features) {
    if (features.empty()) throw UsageError("build_feature_matrix: no features");
    FeatureMatrix matrix;
    matrix.reserve(queries.size());
    for (const auto& query : queries) {
        QueryFeatures qf;
        qf.query_id = query.query_id;

        // A feature that cannot rank this query contributes no candidates;
        // its values then fall back to the per-query minimum below.
        for (const auto& feature : features) {
            RankedList top;
            try {
                top = feature.top_k(query);
            } catch (const DataError&) {
            } catch (const NumericError&) {
            }
            for (const auto& entry : top.entries) {
                if (std::find(qf.candidates.begin(), qf.candidates.end(), entry.doc_name) ==
                    qf.candidates.end()) {
                    qf.candidates.push_back(entry.doc_name);
                }
            }
        }
        std::sort(qf.candidates.begin(), qf.candidates.end());
        if (qf.candidates.empty()) {
            throw DataError("build_feature_matrix: no candidates for query '" + query.query_id + "'");
        }

        qf.values = Matrix(qf.candidates.size(), features.size());
        for (std::size_t f = 0; f < features.size(); ++f) {
            std::vector<double> raw(qf.candidates.size(), 0.0);
            std::vector<char> present(qf.candidates.size(), 0);
            double min_present = 0.0;
            bool any_present = false;
            for (std::size_t c = 0; c < qf.candidates.size(); ++c) {
                std::optional<double> v;
                try {
                    v = features[f].value(query, qf.candidates[c]);
                } catch (const DataError&) {
                } catch (const NumericError&) {
                }
                if (v) {
                    raw[c] = *v;
                    present[c] = 1;
                    min_present = any_present ? std::min(min_present, *v) : *v;
                    any_present = true;
                }
            }
            // Absent cells take the feature's per-query minimum, which
            // min-max scaling then sends to 0.
            for (std::size_t c = 0; c < qf.candidates.size(); ++c) {
                if (!present[c]) raw[c] = any_present ? min_present : 0.0;
            }
            const auto normalized = normalize_per_query(raw);
            for (std::size_t c = 0; c < qf.candidates.size(); ++c) qf.values(c, f) = normalized[c];
        }
        matrix.push_back(std::move(qf));
    }
    return matrix;
}

inline RankedList fuse_query(const QueryFeatures& qf, std::span<const double> weights,
                             std::size_t k = 1000) {
    RankedList out;
    out.query_id = qf.query_id;
    out.entries.reserve(qf.candidates.size());
    for (std::size_t c = 0; c < qf.candidates.size(); ++c) {
        double score = 0.0;
        for (std::size_t f = 0; f < weights.size(); ++f) score += weights[f] * qf.values(c, f);
        out.entries.push_back({qf.candidates[c], score});
    }
    sort_ranked(out.entries);
    truncate_ranked(out.entries, k);
    return out;
}

namespace detail {

inline double training_map(const FeatureMatrix& matrix, std::span<const std::size_t> query_indices,
                           std::span<const double> weights, const Qrels& qrels) {
    double sum = 0.0;
    std::size_t judged = 0;
    for (std::size_t idx : query_indices) {
        const auto& qf = matrix[idx];
        if (qrels.num_relevant(qf.query_id) == 0) continue;
        sum += average_precision(fuse_query(qf, weights), qrels);
        ++judged;
    }
    if (judged == 0) throw DataError("grid search: no training query has relevant documents");
    return sum / static_cast<double>(judged);
}

}  // namespace detail

// Exhaustive sweep of each weight over {0, step, 2*step, ..., 1}, skipping
// the all-zero vector; ties keep the earliest configuration in
// lexicographic grid order.
inline std::vector<double> grid_search_weights(const FeatureMatrix& matrix,
                                               std::span<const std::size_t> training_queries,
                                               const Qrels& qrels,
                                               double step = kDefaultGridStep) {
    if (matrix.empty()) throw UsageError("grid_search_weights: empty feature matrix");
    if (!(step > 0.0 && step <= 1.0)) throw UsageError("grid_search_weights: bad step");
    const std::size_t num_features = matrix.front().values.cols();

    std::vector<double> grid;
    for (std::size_t i = 0;; ++i) {
        const double w = static_cast<double>(i) * step;
        if (w > 1.0 + 1e-12) break;
        grid.push_back(std::min(w, 1.0));
    }

    std::vector<std::size_t> cursor(num_features, 0);
    std::vector<double> best_weights;
    double best_map = -1.0;
    while (true) {
        bool all_zero = true;
        for (std::size_t c : cursor) {
            if (c != 0) {
                all_zero = false;
                break;
            }
        }
        if (!all_zero) {
            std::vector<double> weights(num_features);
            for (std::size_t f = 0; f < num_features; ++f) weights[f] = grid[cursor[f]];
            const double map = detail::training_map(matrix, training_queries, weights, qrels);
            if (map > best_map) {
                best_map = map;
                best_weights = std::move(weights);
            }
        }
        // Lexicographic successor: last feature varies fastest.
        std::size_t f = num_features;
        while (f > 0) {
            --f;
            if (++cursor[f] < grid.size()) break;
            cursor[f] = 0;
            if (f == 0) return best_weights;
        }
    }
}

struct FoldPlan {
    std::size_t num_folds = 20;
    std::uint64_t seed = 42;
};

// Queries shuffled by the plan's seed, then cut into contiguous folds with
// sizes differing by at most one. Every query lands in exactly one fold.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t num_queries,
                                                        const FoldPlan& plan) {
    if (plan.num_folds == 0) throw UsageError("make_folds: need at least one fold");
    if (num_queries < plan.num_folds) {
        throw DataError("make_folds: fewer queries than folds");
    }
    std::vector<std::size_t> order(num_queries);
    for (std::size_t i = 0; i < num_queries; ++i) order[i] = i;
    Rng rng = rng_for_stream(plan.seed, 0);
    for (std::size_t i = num_queries - 1; i > 0; --i) {
        const std::size_t j = uniform_index(rng, i + 1);
        std::swap(order[i], order[j]);
    }
    std::vector<std::vector<std::size_t>> folds(plan.num_folds);
    for (std::size_t f = 0; f < plan.num_folds; ++f) {
        const std::size_t begin = f * num_queries / plan.num_folds;
        const std::size_t end = (f + 1) * num_queries / plan.num_folds;
        folds[f].assign(order.begin() + begin, order.begin() + end);
    }
    return folds;
}

struct FusionOutput {
    std::vector<RankedList> lists;            // concatenated over folds
    std::vector<std::vector<double>> weights;  // per fold
};

// Per fold: fit weights on every query outside the fold, apply them to the
// fold's queries.
inline FusionOutput cross_validated_fusion(const FeatureMatrix& matrix, const Qrels& qrels,
                                           const FoldPlan& plan,
                                           double step = kDefaultGridStep, std::size_t k = 1000) {
    std::size_t judged = 0;
    for (const auto& qf : matrix) judged += qrels.num_relevant(qf.query_id) > 0;
    if (judged < plan.num_folds) {
        throw DataError("cross_validated_fusion: fewer judged queries than folds");
    }
    const auto folds = make_folds(matrix.size(), plan);
    FusionOutput output;
    for (const auto& fold : folds) {
        std::vector<char> in_fold(matrix.size(), 0);
        for (std::size_t idx : fold) in_fold[idx] = 1;
        std::vector<std::size_t> training;
        training.reserve(matrix.size() - fold.size());
        for (std::size_t i = 0; i < matrix.size(); ++i) {
            if (!in_fold[i]) training.push_back(i);
        }
        const auto weights = grid_search_weights(matrix, training, qrels, step);
        for (std::size_t idx : fold) output.lists.push_back(fuse_query(matrix[idx], weights, k));
        output.weights.push_back(weights);
    }
    return output;
}

}  // namespace nvsm
