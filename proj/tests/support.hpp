#pragma once

// Shared fixtures for the test suites and the acceptance runner: a
// deterministic topic-clustered corpus generator, definition-level metric
// oracles, and the finite-difference gradient checker.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nvsm/corpus.hpp"
#include "nvsm/eval.hpp"
#include "nvsm/model.hpp"
#include "nvsm/ranking.hpp"
#include "nvsm/rng.hpp"
#include "nvsm/sampler.hpp"
#include "nvsm/trainer.hpp"
#include "nvsm/trec.hpp"

namespace testsupport {

// ---- synthetic topic-clustered corpus --------------------------------------
//
// A few small topical clusters with disjoint high-probability vocabularies
// sit inside a larger background corpus. Random rankings then score poorly
// (few relevant docs per query) while topic structure is easy to learn.

struct SyntheticSpec {
    std::size_t num_topics = 4;
    std::size_t docs_per_topic = 10;
    std::size_t background_docs = 160;
    std::size_t topic_vocab = 20;
    std::size_t background_vocab = 100;
    std::size_t min_doc_len = 60;
    std::size_t extra_doc_len = 40;
    double topic_word_prob = 0.85;
    std::size_t queries_per_topic = 3;
    std::size_t query_len = 3;
    std::uint64_t seed = 7;
};

struct SyntheticCorpus {
    std::vector<nvsm::RawDocument> raw;
    std::vector<nvsm::Topic> topics;
    nvsm::Qrels qrels;
};

inline SyntheticCorpus make_topic_corpus(const SyntheticSpec& spec = {}) {
    nvsm::Rng rng = nvsm::rng_for_stream(spec.seed, 0);
    SyntheticCorpus out;

    auto topic_word = [&spec](std::size_t topic, std::size_t w) {
        return "t" + std::to_string(topic) + "w" + std::to_string(w);
    };
    auto background_word = [](std::size_t w) { return "bgw" + std::to_string(w); };

    std::vector<std::vector<std::string>> topic_doc_names(spec.num_topics);
    for (std::size_t t = 0; t < spec.num_topics; ++t) {
        for (std::size_t d = 0; d < spec.docs_per_topic; ++d) {
            const std::string name = "t" + std::to_string(t) + "d" + std::to_string(d);
            topic_doc_names[t].push_back(name);
            const std::size_t len =
                spec.min_doc_len + nvsm::uniform_index(rng, spec.extra_doc_len + 1);
            std::string text;
            for (std::size_t i = 0; i < len; ++i) {
                if (!text.empty()) text.push_back(' ');
                if (nvsm::uniform_unit(rng) < spec.topic_word_prob) {
                    text += topic_word(t, nvsm::uniform_index(rng, spec.topic_vocab));
                } else {
                    text += background_word(nvsm::uniform_index(rng, spec.background_vocab));
                }
            }
            out.raw.push_back({name, std::move(text)});
        }
    }
    for (std::size_t d = 0; d < spec.background_docs; ++d) {
        const std::size_t len =
            spec.min_doc_len + nvsm::uniform_index(rng, spec.extra_doc_len + 1);
        std::string text;
        for (std::size_t i = 0; i < len; ++i) {
            if (!text.empty()) text.push_back(' ');
            text += background_word(nvsm::uniform_index(rng, spec.background_vocab));
        }
        out.raw.push_back({"bg" + std::to_string(d), std::move(text)});
    }

    for (std::size_t t = 0; t < spec.num_topics; ++t) {
        for (std::size_t q = 0; q < spec.queries_per_topic; ++q) {
            std::string title;
            for (std::size_t w = 0; w < spec.query_len; ++w) {
                if (!title.empty()) title.push_back(' ');
                title += topic_word(t, (q * spec.query_len + w) % spec.topic_vocab);
            }
            const std::string query_id = "t" + std::to_string(t) + "q" + std::to_string(q);
            out.topics.push_back({query_id, std::move(title)});
            for (const auto& doc : topic_doc_names[t]) out.qrels.add(query_id, doc, 1);
        }
    }
    return out;
}

// Mean AP of uniformly shuffled rankings over all judged queries.
inline double random_ranking_map(const std::vector<nvsm::Topic>& topics, const nvsm::Qrels& qrels,
                                 const nvsm::DocumentStore& store, std::uint64_t seed) {
    nvsm::Rng rng = nvsm::rng_for_stream(seed, 1);
    std::vector<std::string> names;
    names.reserve(store.num_documents());
    for (const auto& doc : store.documents()) names.push_back(doc.external_name);

    double sum = 0.0;
    std::size_t judged = 0;
    for (const auto& topic : topics) {
        if (qrels.num_relevant(topic.query_id) == 0) continue;
        for (std::size_t i = names.size() - 1; i > 0; --i) {
            const std::size_t j = nvsm::uniform_index(rng, i + 1);
            std::swap(names[i], names[j]);
        }
        nvsm::RankedList list;
        list.query_id = topic.query_id;
        for (std::size_t i = 0; i < names.size(); ++i) {
            list.entries.push_back({names[i], static_cast<double>(names.size() - i)});
        }
        sum += nvsm::average_precision(list, qrels);
        ++judged;
    }
    return sum / static_cast<double>(judged);
}

// ---- definition-level metric oracles ---------------------------------------

inline double ap_oracle(const nvsm::RankedList& ranked, const nvsm::Qrels& qrels,
                        std::size_t depth = 1000) {
    const double total = static_cast<double>(qrels.num_relevant(ranked.query_id));
    double sum = 0.0;
    for (std::size_t i = 0; i < ranked.entries.size() && i < depth; ++i) {
        if (!qrels.is_relevant(ranked.query_id, ranked.entries[i].doc_name)) continue;
        std::size_t hits = 0;
        for (std::size_t j = 0; j <= i; ++j) {
            hits += qrels.is_relevant(ranked.query_id, ranked.entries[j].doc_name);
        }
        sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
    return sum / total;
}

inline double ndcg_oracle(const nvsm::RankedList& ranked, const nvsm::Qrels& qrels,
                          std::size_t depth = 100) {
    double dcg = 0.0;
    for (std::size_t i = 0; i < ranked.entries.size() && i < depth; ++i) {
        dcg += static_cast<double>(qrels.grade(ranked.query_id, ranked.entries[i].doc_name)) /
               std::log2(static_cast<double>(i + 2));
    }
    auto grades = qrels.relevant_grades(ranked.query_id);
    std::sort(grades.begin(), grades.end(), std::greater<int>());
    double ideal = 0.0;
    for (std::size_t i = 0; i < grades.size() && i < depth; ++i) {
        ideal += static_cast<double>(grades[i]) / std::log2(static_cast<double>(i + 2));
    }
    return dcg / ideal;
}

inline double p_at_oracle(const nvsm::RankedList& ranked, const nvsm::Qrels& qrels,
                          std::size_t k = 10) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranked.entries.size() && i < k; ++i) {
        hits += qrels.is_relevant(ranked.query_id, ranked.entries[i].doc_name);
    }
    return static_cast<double>(hits) / static_cast<double>(k);
}

// ---- finite-difference gradient checking -----------------------------------

struct GradCheckCase {
    nvsm::ModelParameters params;
    nvsm::Batch batch;
    std::vector<nvsm::DocId> negatives;
    double lambda = 0.0;
};

inline GradCheckCase random_grad_case(std::uint64_t seed) {
    nvsm::Rng rng = nvsm::rng_for_stream(seed, 0);
    GradCheckCase c;
    const std::size_t vocab = 2 + nvsm::uniform_index(rng, 9);    // 2..10
    const std::size_t docs = 2 + nvsm::uniform_index(rng, 5);     // 2..6
    const std::size_t d_w = 2 + nvsm::uniform_index(rng, 5);      // 2..6
    const std::size_t d_d = 2 + nvsm::uniform_index(rng, 3);      // 2..4
    const std::size_t m = nvsm::uniform_index(rng, 2) ? 2 : 4;
    const std::size_t n = 1 + nvsm::uniform_index(rng, 3);        // 1..3
    const std::size_t z = 1 + nvsm::uniform_index(rng, 2);        // 1..2
    c.lambda = nvsm::uniform_index(rng, 2) ? 0.03 : 0.0;

    c.params = nvsm::init_parameters(vocab, docs, d_w, d_d, rng);
    c.params.ngram_width = static_cast<std::uint32_t>(n);
    for (std::size_t i = 0; i < c.params.bias.size(); ++i) {
        c.params.bias[i] = nvsm::uniform_real(rng, -0.3, 0.3);
    }
    c.batch.ngram_width = n;
    for (std::size_t i = 0; i < m; ++i) {
        c.batch.source_doc_ids.push_back(static_cast<nvsm::DocId>(nvsm::uniform_index(rng, docs)));
        for (std::size_t t = 0; t < n; ++t) {
            c.batch.ngram_token_ids.push_back(
                static_cast<nvsm::TermId>(nvsm::uniform_index(rng, vocab)));
        }
    }
    for (std::size_t i = 0; i < m * z; ++i) {
        c.negatives.push_back(static_cast<nvsm::DocId>(nvsm::uniform_index(rng, docs)));
    }
    return c;
}

// Central differences need the loss twice-differentiable in a neighborhood:
// reject cases with activations near the hard_tanh kink or with tiny batch
// variance (where the 1e-5 probe could cross the kink).
inline bool grad_case_is_smooth(const GradCheckCase& c, double kink_margin = 1e-3,
                                double min_variance = 1e-2) {
    const std::size_t m = c.batch.size();
    const std::size_t d_d = c.params.doc_vectors.cols();
    nvsm::Matrix raw(m, d_d);
    for (std::size_t i = 0; i < m; ++i) {
        const auto projected = nvsm::project_raw(c.batch.ngram(i), c.params);
        for (std::size_t j = 0; j < d_d; ++j) raw(i, j) = projected[j];
    }
    const auto [activations, stats] = nvsm::standardize_batch(raw, c.params.bias);
    for (double v : stats.variance) {
        if (v < min_variance) return false;
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < d_d; ++j) {
            const double r = 1.0 / std::sqrt(stats.variance[j] + nvsm::kEpsVariance);
            const double s = (raw(i, j) - stats.mean[j]) * r + c.params.bias[j];
            if (std::abs(std::abs(s) - 1.0) < kink_margin) return false;
        }
    }
    return true;
}

// Max relative error between analytic gradients and 64-bit central
// differences over every parameter coordinate; coordinates where both are
// below the floor are skipped.
inline double gradient_check_max_rel_err(const GradCheckCase& c, double step = 1e-5,
                                         double floor = 1e-7) {
    const auto analytic =
        nvsm::batch_gradients(c.params, c.batch, c.negatives, c.lambda).grads;

    GradCheckCase probe = c;
    auto loss = [&probe]() {
        return nvsm::batch_loss(probe.params, probe.batch, probe.negatives, probe.lambda);
    };
    double max_err = 0.0;
    auto sweep = [&](double* values, const double* grad, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double up = loss();
            values[i] = saved - step;
            const double down = loss();
            values[i] = saved;
            const double fd = (up - down) / (2.0 * step);
            const double scale = std::max(std::abs(fd), std::abs(grad[i]));
            if (scale < floor) continue;
            max_err = std::max(max_err, std::abs(fd - grad[i]) / scale);
        }
    };
    sweep(probe.params.word_vectors.data(), analytic.word_vectors.data(),
          probe.params.word_vectors.size());
    sweep(probe.params.doc_vectors.data(), analytic.doc_vectors.data(),
          probe.params.doc_vectors.size());
    sweep(probe.params.transform.data(), analytic.transform.data(), probe.params.transform.size());
    sweep(probe.params.bias.data(), analytic.bias.data(), probe.params.bias.size());
    return max_err;
}

// Draws smooth random cases (resampling past non-smooth ones) and returns
// the worst relative error seen.
inline double gradient_check_over_cases(std::size_t cases, std::uint64_t seed_base = 1000) {
    double worst = 0.0;
    std::uint64_t seed = seed_base;
    for (std::size_t done = 0; done < cases; ++seed) {
        const auto c = random_grad_case(seed);
        if (!grad_case_is_smooth(c)) continue;
        worst = std::max(worst, gradient_check_max_rel_err(c));
        ++done;
    }
    return worst;
}

}  // namespace testsupport
