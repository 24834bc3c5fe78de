#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nvsm/corpus.hpp"
#include "nvsm/errors.hpp"
#include "nvsm/rng.hpp"

namespace nvsm {

// m n-gram/document pairs; every row is a contiguous token window of its
// source document and batches are always full.
struct Batch {
    std::size_t ngram_width = 0;
    std::vector<TermId> ngram_token_ids;  // m x n, row-major
    std::vector<DocId> source_doc_ids;    // m

    std::size_t size() const { return source_doc_ids.size(); }

    std::span<const TermId> ngram(std::size_t i) const {
        return {ngram_token_ids.data() + i * ngram_width, ngram_width};
    }
};

// Documents eligible for positive sampling: those with at least one full
// window. Short documents keep their vectors and stay valid negatives.
inline std::vector<DocId> eligible_documents(const DocumentStore& store, std::size_t n) {
    std::vector<DocId> out;
    for (const auto& doc : store.documents()) {
        if (doc.length() >= n) out.push_back(doc.doc_id);
    }
    return out;
}

// Document drawn uniformly from the eligible set (or by the optional
// per-document weights), window offset uniform over [0, |d|-n]. The weight
// hook exists for importance sampling; training uses it uniform-only.
inline Batch sample_batch(const DocumentStore& store, std::size_t m, std::size_t n, Rng& rng,
                          std::span<const DocId> eligible,
                          std::span<const double> doc_weights = {}) {
    if (m == 0 || n == 0) throw UsageError("sample_batch: m and n must be positive");
    if (eligible.empty()) throw DataError("sample_batch: no document has length >= n");

    double total_weight = 0.0;
    if (!doc_weights.empty()) {
        for (DocId id : eligible) total_weight += doc_weights[id];
        if (!(total_weight > 0.0)) throw DataError("sample_batch: eligible documents have zero weight");
    }

    Batch batch;
    batch.ngram_width = n;
    batch.ngram_token_ids.reserve(m * n);
    batch.source_doc_ids.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        DocId doc_id;
        if (doc_weights.empty()) {
            doc_id = eligible[uniform_index(rng, eligible.size())];
        } else {
            const double target = uniform_unit(rng) * total_weight;
            double acc = 0.0;
            doc_id = eligible.back();
            for (DocId id : eligible) {
                acc += doc_weights[id];
                if (target < acc) {
                    doc_id = id;
                    break;
                }
            }
        }
        const auto& doc = store.document(doc_id);
        const std::size_t offset = uniform_index(rng, doc.length() - n + 1);
        batch.source_doc_ids.push_back(doc_id);
        for (std::size_t t = 0; t < n; ++t) batch.ngram_token_ids.push_back(doc.tokens[offset + t]);
    }
    return batch;
}

inline Batch sample_batch(const DocumentStore& store, std::size_t m, std::size_t n, Rng& rng) {
    const auto eligible = eligible_documents(store, n);
    return sample_batch(store, m, n, rng, eligible);
}

// z uniform draws with replacement over all document ids; the positive
// document is not excluded.
inline std::vector<DocId> sample_negatives(std::size_t z, std::size_t num_docs, Rng& rng) {
    if (z == 0) throw UsageError("sample_negatives: z must be positive");
    if (num_docs == 0) throw UsageError("sample_negatives: num_docs must be positive");
    std::vector<DocId> out(z);
    for (auto& id : out) id = static_cast<DocId>(uniform_index(rng, num_docs));
    return out;
}

// ceil((1/m) * sum over eligible docs of (|d| - n + 1)).
inline std::size_t batches_per_epoch(const DocumentStore& store, std::size_t m, std::size_t n) {
    if (m == 0) throw UsageError("batches_per_epoch: m must be positive");
    std::uint64_t windows = 0;
    for (const auto& doc : store.documents()) {
        if (doc.length() >= n) windows += doc.length() - n + 1;
    }
    return static_cast<std::size_t>((windows + m - 1) / m);
}

}  // namespace nvsm
