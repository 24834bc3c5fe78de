#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "nvsm/corpus.hpp"
#include "nvsm/errors.hpp"
#include "nvsm/matrix.hpp"
#include "nvsm/model.hpp"
#include "nvsm/ranking.hpp"
#include "nvsm/rng.hpp"
#include "nvsm/trec.hpp"

namespace nvsm {

// (1/R) * sum over retrieved relevant docs within depth of precision at
// that rank; R counts all judged-relevant docs for the query.
inline double average_precision(const RankedList& ranked, const Qrels& qrels,
                                std::size_t depth = 1000) {
    const std::size_t total_relevant = qrels.num_relevant(ranked.query_id);
    if (total_relevant == 0) {
        throw DataError("average_precision: query '" + ranked.query_id +
                        "' has no relevant documents");
    }
    std::size_t seen_relevant = 0;
    double sum = 0.0;
    const std::size_t limit = std::min(depth, ranked.entries.size());
    for (std::size_t i = 0; i < limit; ++i) {
        if (qrels.is_relevant(ranked.query_id, ranked.entries[i].doc_name)) {
            ++seen_relevant;
            sum += static_cast<double>(seen_relevant) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(total_relevant);
}

// Gain is the raw grade, discount log2(i+1); the ideal ranking orders all
// judged relevant documents by grade.
inline double ndcg(const RankedList& ranked, const Qrels& qrels, std::size_t depth = 100) {
    auto grades = qrels.relevant_grades(ranked.query_id);
    if (grades.empty()) {
        throw DataError("ndcg: query '" + ranked.query_id + "' has no relevant documents");
    }
    double dcg = 0.0;
    const std::size_t limit = std::min(depth, ranked.entries.size());
    for (std::size_t i = 0; i < limit; ++i) {
        const int grade = qrels.grade(ranked.query_id, ranked.entries[i].doc_name);
        if (grade > 0) dcg += static_cast<double>(grade) / std::log2(static_cast<double>(i + 2));
    }
    std::sort(grades.begin(), grades.end(), std::greater<int>());
    double ideal = 0.0;
    const std::size_t ideal_limit = std::min(depth, grades.size());
    for (std::size_t i = 0; i < ideal_limit; ++i) {
        ideal += static_cast<double>(grades[i]) / std::log2(static_cast<double>(i + 2));
    }
    return dcg / ideal;
}

// Fixed denominator k even when fewer documents are retrieved.
inline double precision_at(const RankedList& ranked, const Qrels& qrels, std::size_t k = 10) {
    std::size_t relevant = 0;
    const std::size_t limit = std::min(k, ranked.entries.size());
    for (std::size_t i = 0; i < limit; ++i) {
        relevant += qrels.is_relevant(ranked.query_id, ranked.entries[i].doc_name);
    }
    return static_cast<double>(relevant) / static_cast<double>(k);
}

struct QueryMetrics {
    std::string query_id;
    double map = 0.0;
    double ndcg = 0.0;
    double p10 = 0.0;
};

struct MetricReport {
    std::vector<QueryMetrics> per_query;
    double mean_map = 0.0;
    double mean_ndcg = 0.0;
    double mean_p10 = 0.0;
};

// Queries without any relevant document are filtered out before averaging.
inline MetricReport evaluate_run(std::span<const RankedList> lists, const Qrels& qrels) {
    MetricReport report;
    for (const auto& list : lists) {
        if (qrels.num_relevant(list.query_id) == 0) continue;
        QueryMetrics q;
        q.query_id = list.query_id;
        q.map = average_precision(list, qrels);
        q.ndcg = ndcg(list, qrels);
        q.p10 = precision_at(list, qrels);
        report.mean_map += q.map;
        report.mean_ndcg += q.ndcg;
        report.mean_p10 += q.p10;
        report.per_query.push_back(std::move(q));
    }
    if (report.per_query.empty()) {
        throw DataError("evaluate_run: no query has relevant documents in the qrels");
    }
    const double n = static_cast<double>(report.per_query.size());
    report.mean_map /= n;
    report.mean_ndcg /= n;
    report.mean_p10 /= n;
    return report;
}

// Line format: `metric query_id value`, then `metric all mean`.
inline void write_metric_report(std::ostream& out, const MetricReport& report) {
    char value_text[32];
    auto emit = [&](const char* metric, const std::string& query_id, double value) {
        std::snprintf(value_text, sizeof value_text, "%.4f", value);
        out << metric << " " << query_id << " " << value_text << "\n";
    };
    for (const auto& q : report.per_query) emit("map", q.query_id, q.map);
    emit("map", "all", report.mean_map);
    for (const auto& q : report.per_query) emit("ndcg", q.query_id, q.ndcg);
    emit("ndcg", "all", report.mean_ndcg);
    for (const auto& q : report.per_query) emit("p10", q.query_id, q.p10);
    emit("p10", "all", report.mean_p10);
}

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

namespace detail {

inline double mean_of(std::span<const double> values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

// Unbiased sample variance.
inline double variance_of(std::span<const double> values, double mean) {
    double sum = 0.0;
    for (double v : values) sum += (v - mean) * (v - mean);
    return sum / static_cast<double>(values.size() - 1);
}

inline double two_tailed_t_p(double t, double dof) {
    const boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace detail

// Two-tailed paired Student's t-test on the element-wise differences.
inline TestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw UsageError("paired_t_test: length mismatch");
    if (a.size() < 2) throw UsageError("paired_t_test: needs at least 2 pairs");
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    const double mean = detail::mean_of(diff);
    const double var = detail::variance_of(diff, mean);
    if (var == 0.0) throw NumericError("paired_t_test: differences have zero variance");
    const double n = static_cast<double>(diff.size());
    const double t = mean / std::sqrt(var / n);
    return {t, detail::two_tailed_t_p(t, n - 1.0)};
}

// Welch's unequal-variance t-test with Welch-Satterthwaite dof.
inline TestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) throw UsageError("welch_t_test: each sample needs >= 2 values");
    const double mean_a = detail::mean_of(a);
    const double mean_b = detail::mean_of(b);
    const double var_a = detail::variance_of(a, mean_a);
    const double var_b = detail::variance_of(b, mean_b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double se_a = var_a / na;
    const double se_b = var_b / nb;
    if (se_a + se_b == 0.0) throw NumericError("welch_t_test: both samples have zero variance");
    const double t = (mean_a - mean_b) / std::sqrt(se_a + se_b);
    const double dof = (se_a + se_b) * (se_a + se_b) /
                       (se_a * se_a / (na - 1.0) + se_b * se_b / (nb - 1.0));
    return {t, detail::two_tailed_t_p(t, dof)};
}

inline double pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw UsageError("pearson: length mismatch");
    if (x.size() < 3) throw UsageError("pearson: needs at least 3 points");
    const double mean_x = detail::mean_of(x);
    const double mean_y = detail::mean_of(y);
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mean_x) * (x[i] - mean_x);
        syy += (y[i] - mean_y) * (y[i] - mean_y);
        sxy += (x[i] - mean_x) * (y[i] - mean_y);
    }
    if (sxx == 0.0 || syy == 0.0) throw NumericError("pearson: zero variance input");
    return sxy / std::sqrt(sxx * syy);
}

// Pearson r with permutation significance: p is the add-one-smoothed
// fraction of y-permutations whose |r| reaches |r_observed|.
inline TestResult pearson_permutation(std::span<const double> x, std::span<const double> y,
                                      std::size_t permutations = 10000, std::uint64_t seed = 42) {
    const double r_observed = pearson_r(x, y);
    std::vector<double> shuffled(y.begin(), y.end());
    Rng rng = rng_for_stream(seed, 0);
    std::size_t at_least = 0;
    for (std::size_t p = 0; p < permutations; ++p) {
        for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
            const std::size_t j = uniform_index(rng, i + 1);
            std::swap(shuffled[i], shuffled[j]);
        }
        if (std::abs(pearson_r(x, shuffled)) >= std::abs(r_observed)) ++at_least;
    }
    const double p_value = static_cast<double>(at_least + 1) / static_cast<double>(permutations + 1);
    return {r_observed, p_value};
}

// Mean over the query's relevant stored documents of the fraction of
// distinct query terms the document contains. Terms outside the vocabulary
// stay in the denominator (they can never match).
inline double titlestat_rel(const std::string& query_id, std::span<const std::string> query_terms,
                            const Qrels& qrels, const DocumentStore& store) {
    std::vector<std::string> distinct;
    for (const auto& term : query_terms) {
        if (std::find(distinct.begin(), distinct.end(), term) == distinct.end()) {
            distinct.push_back(term);
        }
    }
    if (distinct.empty()) throw UsageError("titlestat_rel: empty query");

    double sum = 0.0;
    std::size_t docs = 0;
    for (const auto& doc_name : qrels.relevant_documents(query_id)) {
        const auto doc_id = store.find_document(doc_name);
        if (!doc_id) continue;
        const auto& doc = store.document(*doc_id);
        const std::unordered_set<TermId> doc_terms(doc.tokens.begin(), doc.tokens.end());
        std::size_t overlap = 0;
        for (const auto& term : distinct) {
            if (auto id = store.vocabulary().find(term)) overlap += doc_terms.contains(*id);
        }
        sum += static_cast<double>(overlap) / static_cast<double>(distinct.size());
        ++docs;
    }
    if (docs == 0) {
        throw DataError("titlestat_rel: query '" + query_id +
                        "' has no relevant documents in the store");
    }
    return sum / static_cast<double>(docs);
}

enum class FrequencyBand { Bottom, Middle, Top };

struct LuhnRow {
    std::string term;
    std::int64_t collection_frequency = 0;
    double norm = 0.0;
    FrequencyBand band = FrequencyBand::Bottom;
};

struct LuhnAnalysis {
    std::vector<LuhnRow> rows;  // ascending collection-frequency rank
    double middle_mean = 0.0;
    double outer_mean = 0.0;
    TestResult test;
};

// Terms ranked by collection frequency (ties lexicographic) and split into
// bottom 25% / middle 50% / top 25%; Welch's t-test compares the middle
// band's word-vector norms with the pooled outer bands.
inline LuhnAnalysis luhn_norm_analysis(const ModelParameters& params,
                                       const Vocabulary& vocabulary) {
    const std::size_t v = vocabulary.size();
    if (v < 4) throw DataError("luhn_norm_analysis: vocabulary has fewer than 4 terms");
    if (params.word_vectors.rows() != v) {
        throw DataError("luhn_norm_analysis: model and vocabulary sizes differ");
    }
    std::vector<TermId> order(v);
    for (TermId id = 0; id < v; ++id) order[id] = id;
    std::sort(order.begin(), order.end(), [&vocabulary](TermId a, TermId b) {
        const auto cf_a = vocabulary.collection_frequency(a);
        const auto cf_b = vocabulary.collection_frequency(b);
        if (cf_a != cf_b) return cf_a < cf_b;
        return vocabulary.term(a) < vocabulary.term(b);
    });

    const std::size_t q1 = v / 4;
    const std::size_t q3 = 3 * v / 4;
    LuhnAnalysis analysis;
    analysis.rows.reserve(v);
    std::vector<double> middle;
    std::vector<double> outer;
    for (std::size_t rank = 0; rank < v; ++rank) {
        const TermId id = order[rank];
        const auto row = params.word_vectors.row(id);
        const double norm = std::sqrt(dot(row, row));
        const FrequencyBand band = rank < q1 ? FrequencyBand::Bottom
                                 : rank < q3 ? FrequencyBand::Middle
                                             : FrequencyBand::Top;
        (band == FrequencyBand::Middle ? middle : outer).push_back(norm);
        analysis.rows.push_back({vocabulary.term(id), vocabulary.collection_frequency(id), norm, band});
    }
    analysis.middle_mean = detail::mean_of(middle);
    analysis.outer_mean = detail::mean_of(outer);
    const double var_middle = detail::variance_of(middle, analysis.middle_mean);
    const double var_outer = detail::variance_of(outer, analysis.outer_mean);
    if (var_middle == 0.0 && var_outer == 0.0 && analysis.middle_mean == analysis.outer_mean) {
        analysis.test = {0.0, 1.0};  // identical constant norms: no separation
    } else {
        analysis.test = welch_t_test(middle, outer);
    }
    return analysis;
}

}  // namespace nvsm
