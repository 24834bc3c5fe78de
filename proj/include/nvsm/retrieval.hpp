#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nvsm/corpus.hpp"
#include "nvsm/errors.hpp"
#include "nvsm/matrix.hpp"
#include "nvsm/model.hpp"
#include "nvsm/parallel.hpp"
#include "nvsm/ranking.hpp"

namespace nvsm {

inline constexpr std::size_t kDefaultRankDepth = 1000;

// Table 5 width set; the CLI uses it when no explicit widths are given.
inline constexpr std::size_t kDefaultEnsembleWidths[] = {2, 4, 8, 10, 12, 16, 24, 32};

inline double cosine(std::span<const double> a, std::span<const double> b) {
    double norm_a = 0.0;
    double norm_b = 0.0;
    for (double v : a) norm_a += v * v;
    for (double v : b) norm_b += v * v;
    if (norm_a == 0.0) throw NumericError("cosine: zero query projection");
    if (norm_b == 0.0) throw NumericError("cosine: zero document vector");
    return dot(a, b) / std::sqrt(norm_a * norm_b);
}

inline double score(std::span<const std::string> query_terms, DocId doc_id,
                    const ModelParameters& params, const Vocabulary& vocabulary) {
    const auto projection = project_query(query_terms, params, vocabulary);
    return cosine(projection, params.doc_vectors.row(doc_id));
}

namespace detail {

// Cosine of one query projection against every document vector.
inline std::vector<double> score_all(std::span<const double> projection,
                                     const ModelParameters& params, unsigned workers) {
    double norm_q = 0.0;
    for (double v : projection) norm_q += v * v;
    if (norm_q == 0.0) throw NumericError("cosine: zero query projection");
    const double inv_norm_q = 1.0 / std::sqrt(norm_q);
    std::vector<double> scores(params.doc_vectors.rows());
    parallel_for(scores.size(), workers, [&](std::size_t d) {
        const auto doc = params.doc_vectors.row(d);
        double norm_d = 0.0;
        for (double v : doc) norm_d += v * v;
        if (norm_d == 0.0) throw NumericError("cosine: zero document vector");
        scores[d] = dot(projection, doc) * inv_norm_q / std::sqrt(norm_d);
    });
    return scores;
}

inline RankedList ranked_from_scores(std::string query_id, const std::vector<double>& scores,
                                     const DocumentStore& store, std::size_t k) {
    RankedList out;
    out.query_id = std::move(query_id);
    out.entries.reserve(scores.size());
    for (std::size_t d = 0; d < scores.size(); ++d) {
        out.entries.push_back({store.document(static_cast<DocId>(d)).external_name, scores[d]});
    }
    sort_ranked(out.entries);
    truncate_ranked(out.entries, k);
    return out;
}

}  // namespace detail

// Exhaustive scoring of every document.
inline RankedList rank(const std::string& query_id, std::span<const std::string> query_terms,
                       const ModelParameters& params, const DocumentStore& store,
                       std::size_t k = kDefaultRankDepth, unsigned workers = 1) {
    const auto projection = project_query(query_terms, params, store.vocabulary());
    const auto scores = detail::score_all(projection, params, workers);
    return detail::ranked_from_scores(query_id, scores, store, k);
}

struct EnsembleSpec {
    std::vector<ModelParameters> members;
    std::size_t candidate_depth = kDefaultRankDepth;
};

// Sum of per-member standardized scores. Candidates are the union of the
// members' top-depth lists; each member's mean and (unbiased) variance come
// from its own top-depth scores, and candidates outside that list are still
// scored exactly by the member before standardizing.
inline RankedList ensemble_rank(const std::string& query_id,
                                std::span<const std::string> query_terms,
                                const EnsembleSpec& ensemble, const DocumentStore& store,
                                std::size_t k = kDefaultRankDepth, unsigned workers = 1) {
    if (ensemble.members.empty()) throw UsageError("ensemble_rank: no members");
    const std::size_t num_docs = store.num_documents();
    std::vector<double> combined(num_docs, 0.0);
    std::vector<char> is_candidate(num_docs, 0);

    for (const auto& member : ensemble.members) {
        const auto projection = project_query(query_terms, member, store.vocabulary());
        const auto scores = detail::score_all(projection, member, workers);
        auto top = detail::ranked_from_scores(query_id, scores, store, ensemble.candidate_depth);

        double mean = 0.0;
        double min_score = top.entries.front().score;
        double max_score = min_score;
        for (const auto& e : top.entries) {
            mean += e.score;
            min_score = std::min(min_score, e.score);
            max_score = std::max(max_score, e.score);
        }
        mean /= static_cast<double>(top.entries.size());
        if (top.entries.size() < 2 || min_score == max_score) {
            throw NumericError("ensemble_rank: member top-" +
                               std::to_string(ensemble.candidate_depth) + " scores are constant");
        }
        double variance = 0.0;
        for (const auto& e : top.entries) variance += (e.score - mean) * (e.score - mean);
        variance /= static_cast<double>(top.entries.size() - 1);
        const double inv_sigma = 1.0 / std::sqrt(variance);

        for (const auto& e : top.entries) is_candidate[*store.find_document(e.doc_name)] = 1;
        for (std::size_t d = 0; d < num_docs; ++d) {
            combined[d] += (scores[d] - mean) * inv_sigma;
        }
    }

    RankedList out;
    out.query_id = query_id;
    for (std::size_t d = 0; d < num_docs; ++d) {
        if (is_candidate[d]) {
            out.entries.push_back({store.document(static_cast<DocId>(d)).external_name, combined[d]});
        }
    }
    sort_ranked(out.entries);
    truncate_ranked(out.entries, k);
    return out;
}

}  // namespace nvsm
