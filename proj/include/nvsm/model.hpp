#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nvsm/corpus.hpp"
#include "nvsm/errors.hpp"
#include "nvsm/matrix.hpp"
#include "nvsm/rng.hpp"

namespace nvsm {

// Variance floor inside the batch standardization; keeps degenerate batches
// (constant feature columns) finite.
inline constexpr double kEpsVariance = 1e-6;

struct ModelParameters {
    Matrix word_vectors;        // |V| x d_w
    Matrix doc_vectors;         // |D| x d_d
    Matrix transform;           // d_d x d_w
    std::vector<double> bias;   // d_d, applied during training only

    std::uint32_t word_dim = 0;
    std::uint32_t doc_dim = 0;
    std::uint32_t ngram_width = 0;
    std::uint64_t iteration = 0;
    std::uint64_t vocabulary_hash = 0;
};

struct BatchStats {
    std::vector<double> mean;      // per feature, over the batch
    std::vector<double> variance;  // biased (1/m) estimator
};

inline std::vector<double> l2_normalize(std::span<const double> x) {
    double norm_sq = 0.0;
    for (double v : x) norm_sq += v * v;
    if (norm_sq == 0.0) throw NumericError("l2_normalize: zero vector");
    const double inv = 1.0 / std::sqrt(norm_sq);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv;
    return out;
}

// Mean of the constituent word vectors (order-insensitive by construction).
inline std::vector<double> compose_ngram(std::span<const TermId> word_ids,
                                         const Matrix& word_vectors) {
    if (word_ids.empty()) throw UsageError("compose_ngram: empty word sequence");
    std::vector<double> out(word_vectors.cols(), 0.0);
    for (TermId id : word_ids) axpy(1.0, word_vectors.row(id), out);
    const double inv = 1.0 / static_cast<double>(word_ids.size());
    for (double& v : out) v *= inv;
    return out;
}

inline double hard_tanh(double x) {
    if (x > 1.0) return 1.0;
    if (x < -1.0) return -1.0;
    return x;
}

inline std::vector<double> hard_tanh(std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = hard_tanh(x[i]);
    return out;
}

inline std::vector<double> transform_apply(const Matrix& transform, std::span<const double> x) {
    std::vector<double> out(transform.rows());
    for (std::size_t r = 0; r < transform.rows(); ++r) out[r] = dot(transform.row(r), x);
    return out;
}

// Non-standardized projection of an n-gram into document feature space:
// the composed word average is L2-normalized before the linear transform.
inline std::vector<double> project_raw(std::span<const TermId> word_ids,
                                       const ModelParameters& params) {
    const auto composed = compose_ngram(word_ids, params.word_vectors);
    const auto unit = l2_normalize(composed);
    return transform_apply(params.transform, unit);
}

// Standardizes each feature over the batch (biased variance, floored by
// eps_var), adds the bias, clamps. Returns the stats the backward pass
// needs. Rows of raw_projections are instances.
inline std::pair<Matrix, BatchStats> standardize_batch(const Matrix& raw_projections,
                                                       std::span<const double> bias,
                                                       double eps_var = kEpsVariance) {
    const std::size_t m = raw_projections.rows();
    const std::size_t dim = raw_projections.cols();
    if (m < 2) throw UsageError("standardize_batch: batch size must be at least 2");
    BatchStats stats;
    stats.mean.assign(dim, 0.0);
    stats.variance.assign(dim, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < dim; ++j) stats.mean[j] += raw_projections(i, j);
    }
    for (double& v : stats.mean) v /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double centered = raw_projections(i, j) - stats.mean[j];
            stats.variance[j] += centered * centered;
        }
    }
    for (double& v : stats.variance) v /= static_cast<double>(m);

    Matrix activations(m, dim);
    for (std::size_t j = 0; j < dim; ++j) {
        const double inv_std = 1.0 / std::sqrt(stats.variance[j] + eps_var);
        for (std::size_t i = 0; i < m; ++i) {
            activations(i, j) =
                hard_tanh((raw_projections(i, j) - stats.mean[j]) * inv_std + bias[j]);
        }
    }
    return {std::move(activations), std::move(stats)};
}

inline std::vector<TermId> lookup_terms(std::span<const std::string> terms,
                                        const Vocabulary& vocabulary) {
    std::vector<TermId> ids;
    ids.reserve(terms.size());
    for (const auto& term : terms) {
        if (auto id = vocabulary.find(term)) ids.push_back(*id);
    }
    return ids;
}

// Inference-time projection: transform of the word average, with OOV terms
// dropped. Standardization, bias and clamping are training-only; ranking by
// cosine is unchanged by the skipped normalization, so none is applied.
// training_activations reruns the training nonlinearity (minus batch stats,
// which do not exist for a single query) for analysis purposes.
inline std::vector<double> project_query(std::span<const std::string> terms,
                                         const ModelParameters& params,
                                         const Vocabulary& vocabulary,
                                         bool training_activations = false) {
    const auto ids = lookup_terms(terms, vocabulary);
    if (ids.empty()) throw DataError("query has no in-vocabulary terms");
    if (!training_activations) {
        return transform_apply(params.transform, compose_ngram(ids, params.word_vectors));
    }
    auto projected = project_raw(ids, params);
    for (std::size_t j = 0; j < projected.size(); ++j) {
        projected[j] = hard_tanh(projected[j] + params.bias[j]);
    }
    return projected;
}

// Entries i.i.d. uniform on (-1/sqrt(fan_in), +1/sqrt(fan_in)); the bias
// starts at zero. Draw order is fixed (words, documents, transform) so a
// seed pins the full parameter state.
inline ModelParameters init_parameters(std::size_t vocab_size, std::size_t doc_count,
                                       std::size_t word_dim, std::size_t doc_dim, Rng& rng) {
    if (vocab_size == 0 || doc_count == 0 || word_dim == 0 || doc_dim == 0) {
        throw UsageError("init_parameters: all dimensions must be at least 1");
    }
    ModelParameters params;
    params.word_dim = static_cast<std::uint32_t>(word_dim);
    params.doc_dim = static_cast<std::uint32_t>(doc_dim);
    params.word_vectors = Matrix(vocab_size, word_dim);
    params.doc_vectors = Matrix(doc_count, doc_dim);
    params.transform = Matrix(doc_dim, word_dim);
    params.bias.assign(doc_dim, 0.0);

    const double word_bound = 1.0 / std::sqrt(static_cast<double>(word_dim));
    const double doc_bound = 1.0 / std::sqrt(static_cast<double>(doc_dim));
    auto fill_uniform = [&rng](Matrix& mat, double bound) {
        double* p = mat.data();
        for (std::size_t i = 0; i < mat.size(); ++i) p[i] = uniform_real(rng, -bound, bound);
    };
    fill_uniform(params.word_vectors, word_bound);
    fill_uniform(params.doc_vectors, doc_bound);
    fill_uniform(params.transform, word_bound);
    return params;
}

struct ModelFootprint {
    std::uint64_t parameter_count = 0;
    std::uint64_t bytes = 0;
};

// Optimizer copies account for the parameter plus its two moment
// accumulators kept resident during training.
inline ModelFootprint estimate_model_size(std::uint64_t vocab_size, std::uint64_t doc_count,
                                          std::uint64_t word_dim, std::uint64_t doc_dim,
                                          std::uint64_t bytes_per_value = 4,
                                          std::uint64_t optimizer_copies = 3) {
    ModelFootprint footprint;
    footprint.parameter_count =
        vocab_size * word_dim + doc_dim * word_dim + doc_count * doc_dim + doc_dim;
    footprint.bytes = footprint.parameter_count * bytes_per_value * optimizer_copies;
    return footprint;
}

}  // namespace nvsm
