#pragma once

#include <cmath>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "nvsm/corpus.hpp"
#include "nvsm/errors.hpp"
#include "nvsm/parallel.hpp"
#include "nvsm/ranking.hpp"

namespace nvsm {

// Hyperparameter grids accepted by the CLI.
inline constexpr double kDirichletMuGrid[] = {125, 250, 500, 750, 1000, 2000, 3000, 4000, 5000};
inline constexpr double kJelinekMercerLambdaGrid[] = {
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50,
    0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95, 1.00};

enum class SmoothingKind { Dirichlet, JelinekMercer };

struct SmoothingConfig {
    SmoothingKind kind = SmoothingKind::Dirichlet;
    double value = 1000.0;  // mu for Dirichlet, lambda for Jelinek-Mercer

    static SmoothingConfig dirichlet(double mu) {
        if (!(mu > 0.0)) throw UsageError("dirichlet smoothing: mu must be positive");
        return {SmoothingKind::Dirichlet, mu};
    }
    static SmoothingConfig jelinek_mercer(double lambda) {
        if (!(lambda > 0.0 && lambda <= 1.0)) {
            throw UsageError("jelinek-mercer smoothing: lambda must lie in (0, 1]");
        }
        return {SmoothingKind::JelinekMercer, lambda};
    }
};

// Collection model: collection-frequency MLE.
inline double collection_prob(TermId term, const DocumentStore& store) {
    return static_cast<double>(store.vocabulary().collection_frequency(term)) /
           static_cast<double>(store.total_token_count());
}

namespace detail {

inline double smoothed_term_prob(double tf, double doc_len, double collection,
                                 const SmoothingConfig& config) {
    if (config.kind == SmoothingKind::Dirichlet) {
        return (tf + config.value * collection) / (doc_len + config.value);
    }
    return config.value * (tf / doc_len) + (1.0 - config.value) * collection;
}

}  // namespace detail

// Sum over in-vocabulary query terms of log p(term | document); OOV terms
// are skipped so the term set matches what the vector models see.
inline double qlm_log_score(std::span<const std::string> query_terms, const Document& doc,
                            const DocumentStore& store, const SmoothingConfig& config) {
    if (doc.length() == 0) {
        throw DataError("qlm_log_score: document '" + doc.external_name + "' is empty");
    }
    std::vector<TermId> ids;
    for (const auto& term : query_terms) {
        if (auto id = store.vocabulary().find(term)) ids.push_back(*id);
    }
    if (ids.empty()) throw DataError("query has no in-vocabulary terms");

    std::unordered_map<TermId, double> tf;
    for (TermId id : ids) tf.emplace(id, 0.0);
    for (TermId token : doc.tokens) {
        if (auto it = tf.find(token); it != tf.end()) it->second += 1.0;
    }
    const double doc_len = static_cast<double>(doc.length());
    double total = 0.0;
    for (TermId id : ids) {
        total += std::log(
            detail::smoothed_term_prob(tf.at(id), doc_len, collection_prob(id, store), config));
    }
    return total;
}

inline RankedList qlm_rank(const std::string& query_id, std::span<const std::string> query_terms,
                           const DocumentStore& store, const SmoothingConfig& config,
                           std::size_t k = 1000, unsigned workers = 1) {
    std::vector<double> scores(store.num_documents());
    parallel_for(scores.size(), workers, [&](std::size_t d) {
        scores[d] = qlm_log_score(query_terms, store.document(static_cast<DocId>(d)), store, config);
    });
    RankedList out;
    out.query_id = query_id;
    out.entries.reserve(scores.size());
    for (std::size_t d = 0; d < scores.size(); ++d) {
        out.entries.push_back({store.document(static_cast<DocId>(d)).external_name, scores[d]});
    }
    sort_ranked(out.entries);
    truncate_ranked(out.entries, k);
    return out;
}

}  // namespace nvsm
