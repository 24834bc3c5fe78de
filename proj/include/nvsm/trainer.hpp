#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nvsm/corpus.hpp"
#include "nvsm/errors.hpp"
#include "nvsm/matrix.hpp"
#include "nvsm/model.hpp"
#include "nvsm/parallel.hpp"
#include "nvsm/rng.hpp"
#include "nvsm/sampler.hpp"

namespace nvsm {

// Probability clamp applied before every log; a clamped probability also
// stops the gradient (the clamped loss is locally constant there).
inline constexpr double kEpsProb = 1e-12;

struct TrainConfig {
    std::size_t word_dim = 300;
    std::size_t doc_dim = 256;
    std::size_t ngram_width = 10;
    std::size_t negatives = 10;      // z
    double learning_rate = 0.001;    // alpha
    double regularization = 0.01;    // lambda
    std::size_t batch_size = 51200;  // m
    std::size_t iterations = 15;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double eps_variance = kEpsVariance;
    std::uint64_t seed = 42;
    unsigned workers = 1;

    void validate() const {
        if (word_dim == 0 || doc_dim == 0 || ngram_width == 0) {
            throw UsageError("train config: dimensions must be positive");
        }
        if (negatives < 1) throw UsageError("train config: z must be at least 1");
        if (batch_size < 2) throw UsageError("train config: batch size must be at least 2");
        if (!(learning_rate > 0.0)) throw UsageError("train config: learning rate must be positive");
        if (regularization < 0.0) throw UsageError("train config: lambda must be non-negative");
        if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
            throw UsageError("train config: adam betas must lie in [0, 1)");
        }
        if (!(adam_epsilon > 0.0) || !(eps_variance > 0.0)) {
            throw UsageError("train config: epsilons must be positive");
        }
        if (workers == 0) throw UsageError("train config: workers must be at least 1");
    }
};

struct Gradients {
    Matrix word_vectors;
    Matrix doc_vectors;
    Matrix transform;
    std::vector<double> bias;
};

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double similarity_prob(std::span<const double> doc_vector,
                              std::span<const double> projection) {
    return sigmoid(dot(doc_vector, projection));
}

inline double clamp_prob(double p) {
    if (p < kEpsProb) return kEpsProb;
    if (p > 1.0 - kEpsProb) return 1.0 - kEpsProb;
    return p;
}

// Adjusted negative-sampling log likelihood of one n-gram/document pair:
// ((z+1)/(2z)) * [ z*log P(S|d+) + sum_k log(1 - P(S|d_k)) ].
inline double instance_log_prob(DocId positive, std::span<const double> projection,
                                std::span<const DocId> negative_ids, const Matrix& doc_vectors) {
    const std::size_t z = negative_ids.size();
    if (z == 0) throw UsageError("instance_log_prob: needs at least one negative");
    const double factor = static_cast<double>(z + 1) / (2.0 * static_cast<double>(z));
    double ll = static_cast<double>(z) *
                std::log(clamp_prob(similarity_prob(doc_vectors.row(positive), projection)));
    for (DocId neg : negative_ids) {
        ll += std::log(1.0 - clamp_prob(similarity_prob(doc_vectors.row(neg), projection)));
    }
    return factor * ll;
}

namespace detail {

// Forward state shared by loss and backward: per-instance unit n-gram
// vectors, their pre-normalization norms, raw projections, batch stats.
struct BatchForward {
    Matrix unit_ngrams;               // m x d_w
    std::vector<double> ngram_norms;  // m
    Matrix raw_projections;           // m x d_d
    BatchStats stats;
    Matrix activations;  // m x d_d, post bias and clamp
};

inline BatchForward batch_forward(const ModelParameters& params, const Batch& batch,
                                  double eps_var, unsigned workers) {
    const std::size_t m = batch.size();
    const std::size_t d_w = params.word_vectors.cols();
    BatchForward fwd;
    fwd.unit_ngrams = Matrix(m, d_w);
    fwd.ngram_norms.assign(m, 0.0);
    fwd.raw_projections = Matrix(m, params.transform.rows());
    parallel_for(m, workers, [&](std::size_t i) {
        const auto composed = compose_ngram(batch.ngram(i), params.word_vectors);
        double norm_sq = 0.0;
        for (double v : composed) norm_sq += v * v;
        if (norm_sq == 0.0) throw NumericError("batch_forward: zero composed n-gram");
        const double norm = std::sqrt(norm_sq);
        fwd.ngram_norms[i] = norm;
        auto unit = fwd.unit_ngrams.row(i);
        for (std::size_t c = 0; c < d_w; ++c) unit[c] = composed[c] / norm;
        auto raw = fwd.raw_projections.row(i);
        for (std::size_t r = 0; r < params.transform.rows(); ++r) {
            raw[r] = dot(params.transform.row(r), unit);
        }
    });
    auto [activations, stats] = standardize_batch(fwd.raw_projections, params.bias, eps_var);
    fwd.activations = std::move(activations);
    fwd.stats = std::move(stats);
    return fwd;
}

inline double data_loss(const ModelParameters& params, const Batch& batch,
                        std::span<const DocId> negatives, const Matrix& activations) {
    const std::size_t m = batch.size();
    const std::size_t z = negatives.size() / m;
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        total += instance_log_prob(batch.source_doc_ids[i], activations.row(i),
                                   negatives.subspan(i * z, z), params.doc_vectors);
    }
    return -total / static_cast<double>(m);
}

inline double regularization_loss(const ModelParameters& params, double lambda, std::size_t m) {
    return lambda / (2.0 * static_cast<double>(m)) *
           (params.word_vectors.frobenius_squared() + params.doc_vectors.frobenius_squared() +
            params.transform.frobenius_squared());
}

}  // namespace detail

// Eq-for-eq objective: mean negative instance log prob plus the scaled
// Frobenius regularizer over R_V, R_D, W (bias excluded). negatives holds
// z ids per instance, row-major.
inline double batch_loss(const ModelParameters& params, const Batch& batch,
                         std::span<const DocId> negatives, double lambda,
                         double eps_var = kEpsVariance, unsigned workers = 1) {
    const auto fwd = detail::batch_forward(params, batch, eps_var, workers);
    return detail::data_loss(params, batch, negatives, fwd.activations) +
           detail::regularization_loss(params, lambda, batch.size());
}

struct BatchResult {
    double loss = 0.0;
    Gradients grads;
};

// Exact gradients of batch_loss. The chain runs through the batch mean and
// variance (they are functions of the batch) and through the n-gram L2
// normalization; hard_tanh passes gradient strictly inside (-1, 1).
inline BatchResult batch_gradients(const ModelParameters& params, const Batch& batch,
                                   std::span<const DocId> negatives, double lambda,
                                   double eps_var = kEpsVariance, unsigned workers = 1) {
    const std::size_t m = batch.size();
    const std::size_t d_w = params.word_vectors.cols();
    const std::size_t d_d = params.doc_vectors.cols();
    const std::size_t z = negatives.size() / m;
    if (z == 0 || negatives.size() != m * z) {
        throw UsageError("batch_gradients: negatives must hold z ids per instance");
    }

    const auto fwd = detail::batch_forward(params, batch, eps_var, workers);

    BatchResult result;
    result.grads.word_vectors = Matrix(params.word_vectors.rows(), d_w);
    result.grads.doc_vectors = Matrix(params.doc_vectors.rows(), d_d);
    result.grads.transform = Matrix(d_d, d_w);
    result.grads.bias.assign(d_d, 0.0);

    // Per-instance log likelihoods and gradients w.r.t. the pre-clamp
    // standardized activations; doc-vector coefficients kept per instance
    // so the scatter below stays in instance order.
    const double factor = static_cast<double>(z + 1) / (2.0 * static_cast<double>(z));
    std::vector<double> instance_ll(m, 0.0);
    Matrix d_preclamp(m, d_d);                       // dL/ds_i
    std::vector<double> pos_coef(m, 0.0);            // dL/d dot(R_D[pos], T_i)
    std::vector<double> neg_coef(m * z, 0.0);        // dL/d dot(R_D[neg], T_i)
    const double inv_m = 1.0 / static_cast<double>(m);

    parallel_for(m, workers, [&](std::size_t i) {
        const auto activation = fwd.activations.row(i);
        std::vector<double> d_activation(d_d, 0.0);

        const DocId pos = batch.source_doc_ids[i];
        const double p_pos = similarity_prob(params.doc_vectors.row(pos), activation);
        double ll = static_cast<double>(z) * std::log(clamp_prob(p_pos));
        if (p_pos > kEpsProb && p_pos < 1.0 - kEpsProb) {
            // d(-ll*factor/m)/d dot = -(factor/m) * z * (1 - p_pos)
            const double coef = -inv_m * factor * static_cast<double>(z) * (1.0 - p_pos);
            pos_coef[i] = coef;
            axpy(coef, params.doc_vectors.row(pos), d_activation);
        }
        for (std::size_t k = 0; k < z; ++k) {
            const DocId neg = negatives[i * z + k];
            const double p_neg = similarity_prob(params.doc_vectors.row(neg), activation);
            ll += std::log(1.0 - clamp_prob(p_neg));
            if (p_neg > kEpsProb && p_neg < 1.0 - kEpsProb) {
                const double coef = inv_m * factor * p_neg;
                neg_coef[i * z + k] = coef;
                axpy(coef, params.doc_vectors.row(neg), d_activation);
            }
        }
        instance_ll[i] = factor * ll;

        // hard_tanh backward: zero outside the open interval.
        const auto raw = fwd.raw_projections.row(i);
        auto ds = d_preclamp.row(i);
        for (std::size_t j = 0; j < d_d; ++j) {
            const double r = 1.0 / std::sqrt(fwd.stats.variance[j] + eps_var);
            const double s = (raw[j] - fwd.stats.mean[j]) * r + params.bias[j];
            ds[j] = std::abs(s) < 1.0 ? d_activation[j] : 0.0;
        }
    });

    double data_loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) data_loss -= instance_ll[i];
    result.loss = data_loss * inv_m + detail::regularization_loss(params, lambda, m);

    // Doc-vector scatter; instance order keeps colliding rows deterministic.
    for (std::size_t i = 0; i < m; ++i) {
        const auto activation = fwd.activations.row(i);
        if (pos_coef[i] != 0.0) {
            axpy(pos_coef[i], activation, result.grads.doc_vectors.row(batch.source_doc_ids[i]));
        }
        for (std::size_t k = 0; k < z; ++k) {
            const double coef = neg_coef[i * z + k];
            if (coef != 0.0) axpy(coef, activation, result.grads.doc_vectors.row(negatives[i * z + k]));
        }
    }

    for (std::size_t j = 0; j < d_d; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += d_preclamp(i, j);
        result.grads.bias[j] = acc;
    }

    // Standardization backward, per feature:
    //   dt~_ij = r_j * (G_ij - mean(G_j) - xhat_ij * mean(G_j * xhat_j))
    // with G the gradient w.r.t. xhat and r_j = 1/sqrt(var_j + eps).
    Matrix d_raw(m, d_d);
    parallel_for(d_d, workers, [&](std::size_t j) {
        const double r = 1.0 / std::sqrt(fwd.stats.variance[j] + eps_var);
        double mean_g = 0.0;
        double mean_gx = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double xhat = (fwd.raw_projections(i, j) - fwd.stats.mean[j]) * r;
            mean_g += d_preclamp(i, j);
            mean_gx += d_preclamp(i, j) * xhat;
        }
        mean_g *= inv_m;
        mean_gx *= inv_m;
        for (std::size_t i = 0; i < m; ++i) {
            const double xhat = (fwd.raw_projections(i, j) - fwd.stats.mean[j]) * r;
            d_raw(i, j) = r * (d_preclamp(i, j) - mean_g - xhat * mean_gx);
        }
    });

    // Transform: dW = sum_i dt~_i (outer) u_i, parallel over output rows.
    parallel_for(d_d, workers, [&](std::size_t r) {
        auto out = result.grads.transform.row(r);
        for (std::size_t i = 0; i < m; ++i) axpy(d_raw(i, r), fwd.unit_ngrams.row(i), out);
    });

    // Through the n-gram: du = W^T dt~, then the normalization backward
    // dg = (du - (u . du) u) / |g|, then scatter dg/n onto the word rows.
    Matrix d_composed(m, d_w);
    parallel_for(m, workers, [&](std::size_t i) {
        std::vector<double> du(d_w, 0.0);
        for (std::size_t r = 0; r < d_d; ++r) axpy(d_raw(i, r), params.transform.row(r), du);
        const auto unit = fwd.unit_ngrams.row(i);
        const double u_du = dot(unit, du);
        auto dg = d_composed.row(i);
        const double inv_norm = 1.0 / fwd.ngram_norms[i];
        for (std::size_t c = 0; c < d_w; ++c) dg[c] = (du[c] - u_du * unit[c]) * inv_norm;
    });
    const double inv_n = 1.0 / static_cast<double>(batch.ngram_width);
    for (std::size_t i = 0; i < m; ++i) {
        for (TermId w : batch.ngram(i)) {
            axpy(inv_n, d_composed.row(i), result.grads.word_vectors.row(w));
        }
    }

    // Regularizer: (lambda/m) * theta on the three matrices, never the bias.
    if (lambda != 0.0) {
        const double scale = lambda * inv_m;
        auto add_reg = [scale, workers](const Matrix& theta, Matrix& grad) {
            parallel_for(theta.rows(), workers, [&](std::size_t r) {
                axpy(scale, theta.row(r), grad.row(r));
            });
        };
        add_reg(params.word_vectors, result.grads.word_vectors);
        add_reg(params.doc_vectors, result.grads.doc_vectors);
        add_reg(params.transform, result.grads.transform);
    }
    return result;
}

struct AdamState {
    Matrix m_word, v_word;
    Matrix m_doc, v_doc;
    Matrix m_transform, v_transform;
    std::vector<double> m_bias, v_bias;
    std::uint64_t step = 0;

    explicit AdamState(const ModelParameters& params)
        : m_word(params.word_vectors.rows(), params.word_vectors.cols()),
          v_word(params.word_vectors.rows(), params.word_vectors.cols()),
          m_doc(params.doc_vectors.rows(), params.doc_vectors.cols()),
          v_doc(params.doc_vectors.rows(), params.doc_vectors.cols()),
          m_transform(params.transform.rows(), params.transform.cols()),
          v_transform(params.transform.rows(), params.transform.cols()),
          m_bias(params.bias.size(), 0.0),
          v_bias(params.bias.size(), 0.0) {}
};

namespace detail {

inline void adam_update(double* theta, double* m, double* v, const double* g, std::size_t count,
                        double alpha, double beta1, double beta2, double eps,
                        double bias1, double bias2, unsigned workers) {
    parallel_for(count, workers, [&](std::size_t i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        theta[i] -= alpha * m_hat / (std::sqrt(v_hat) + eps);
    });
}

}  // namespace detail

// Bias-corrected Adam applied densely to every parameter.
inline void adam_step(ModelParameters& params, const Gradients& grads, AdamState& state,
                      double alpha, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                      unsigned workers = 1) {
    ++state.step;
    const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    detail::adam_update(params.word_vectors.data(), state.m_word.data(), state.v_word.data(),
                        grads.word_vectors.data(), params.word_vectors.size(), alpha, beta1, beta2,
                        eps, bias1, bias2, workers);
    detail::adam_update(params.doc_vectors.data(), state.m_doc.data(), state.v_doc.data(),
                        grads.doc_vectors.data(), params.doc_vectors.size(), alpha, beta1, beta2,
                        eps, bias1, bias2, workers);
    detail::adam_update(params.transform.data(), state.m_transform.data(),
                        state.v_transform.data(), grads.transform.data(), params.transform.size(),
                        alpha, beta1, beta2, eps, bias1, bias2, workers);
    detail::adam_update(params.bias.data(), state.m_bias.data(), state.v_bias.data(),
                        grads.bias.data(), params.bias.size(), alpha, beta1, beta2, eps, bias1,
                        bias2, workers);
}

using CheckpointSink = std::function<void(const ModelParameters&, std::size_t iteration)>;
using BatchLogSink = std::function<void(std::size_t iteration, std::size_t batch, double loss)>;

// Epoch loop. Batch b of iteration i is a pure function of (store, seed,
// global batch index): each batch draws its own rng stream, so runs with a
// fixed seed produce identical checkpoints regardless of worker count.
// The checkpoint sink fires on the initialization state (iteration 0) and
// after every iteration.
inline void train(const DocumentStore& store, const TrainConfig& config,
                  const CheckpointSink& on_checkpoint, const BatchLogSink& on_batch = {}) {
    config.validate();
    const auto eligible = eligible_documents(store, config.ngram_width);
    if (eligible.empty()) throw DataError("train: no document has length >= n");

    Rng init_rng = rng_for_stream(config.seed, 0);
    ModelParameters params =
        init_parameters(store.vocabulary().size(), store.num_documents(), config.word_dim,
                        config.doc_dim, init_rng);
    params.ngram_width = static_cast<std::uint32_t>(config.ngram_width);
    params.vocabulary_hash = store.vocabulary().content_hash();
    params.iteration = 0;
    if (on_checkpoint) on_checkpoint(params, 0);

    AdamState state(params);
    const std::size_t batches = batches_per_epoch(store, config.batch_size, config.ngram_width);
    for (std::size_t iter = 1; iter <= config.iterations; ++iter) {
        for (std::size_t b = 0; b < batches; ++b) {
            const std::uint64_t global_index = (iter - 1) * batches + b;
            Rng rng = rng_for_stream(config.seed, 1 + global_index);
            const Batch batch =
                sample_batch(store, config.batch_size, config.ngram_width, rng, eligible);
            std::vector<DocId> negatives(config.batch_size * config.negatives);
            for (auto& id : negatives) {
                id = static_cast<DocId>(uniform_index(rng, store.num_documents()));
            }
            auto result = batch_gradients(params, batch, negatives, config.regularization,
                                          config.eps_variance, config.workers);
            adam_step(params, result.grads, state, config.learning_rate, config.adam_beta1,
                      config.adam_beta2, config.adam_epsilon, config.workers);
            if (on_batch) on_batch(iter, b, result.loss);
        }
        params.iteration = iter;
        if (on_checkpoint) on_checkpoint(params, iter);
    }
}

inline std::vector<ModelParameters> train_collect(const DocumentStore& store,
                                                  const TrainConfig& config,
                                                  const BatchLogSink& on_batch = {}) {
    std::vector<ModelParameters> checkpoints;
    train(store, config,
          [&checkpoints](const ModelParameters& params, std::size_t) {
              checkpoints.push_back(params);
          },
          on_batch);
    return checkpoints;
}

}  // namespace nvsm
