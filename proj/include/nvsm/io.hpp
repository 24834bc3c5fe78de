#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nvsm/container.hpp"
#include "nvsm/corpus.hpp"
#include "nvsm/errors.hpp"
#include "nvsm/model.hpp"

namespace nvsm {

inline void save_model(const std::filesystem::path& path, const ModelParameters& params) {
    Container container;
    container.metadata = {
        params.word_dim,
        params.doc_dim,
        params.ngram_width,
        params.word_vectors.rows(),
        params.doc_vectors.rows(),
        params.iteration,
        params.vocabulary_hash,
    };
    container.records.push_back(make_f32_record(
        "word_vectors", {params.word_vectors.rows(), params.word_vectors.cols()},
        params.word_vectors.data(), params.word_vectors.size()));
    container.records.push_back(make_f32_record(
        "document_vectors", {params.doc_vectors.rows(), params.doc_vectors.cols()},
        params.doc_vectors.data(), params.doc_vectors.size()));
    container.records.push_back(make_f32_record(
        "transform", {params.transform.rows(), params.transform.cols()},
        params.transform.data(), params.transform.size()));
    container.records.push_back(
        make_f32_record("bias", {params.bias.size()}, params.bias.data(), params.bias.size()));
    write_container(path, container);
}

namespace detail {

inline Matrix matrix_from_record(const TensorRecord& rec) {
    if (rec.dims.size() != 2) throw DataError("container: record '" + rec.name + "' is not a matrix");
    const auto values = f32_values(rec);
    Matrix out(rec.dims[0], rec.dims[1]);
    std::copy(values.begin(), values.end(), out.data());
    return out;
}

}  // namespace detail

inline ModelParameters load_model(const std::filesystem::path& path) {
    const Container container = read_container(path);
    const auto& md = container.metadata;
    ModelParameters params;
    params.word_dim = md.word_dim;
    params.doc_dim = md.doc_dim;
    params.ngram_width = md.ngram_width;
    params.iteration = md.iteration;
    params.vocabulary_hash = md.vocabulary_hash;
    params.word_vectors = detail::matrix_from_record(container.require("word_vectors"));
    params.doc_vectors = detail::matrix_from_record(container.require("document_vectors"));
    params.transform = detail::matrix_from_record(container.require("transform"));
    params.bias = f32_values(container.require("bias"));

    if (params.word_vectors.rows() != md.vocab_size || params.word_vectors.cols() != md.word_dim ||
        params.doc_vectors.rows() != md.doc_count || params.doc_vectors.cols() != md.doc_dim ||
        params.transform.rows() != md.doc_dim || params.transform.cols() != md.word_dim ||
        params.bias.size() != md.doc_dim) {
        throw DataError("model container is internally inconsistent: " + path.string());
    }
    return params;
}

namespace detail {

inline std::string join_lines(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back('\n');
        out += parts[i];
    }
    return out;
}

inline std::vector<std::string> split_lines(const std::string& joined, std::size_t expected) {
    std::vector<std::string> out;
    out.reserve(expected);
    std::size_t begin = 0;
    while (begin <= joined.size()) {
        const auto nl = joined.find('\n', begin);
        if (nl == std::string::npos) {
            out.push_back(joined.substr(begin));
            break;
        }
        out.push_back(joined.substr(begin, nl - begin));
        begin = nl + 1;
    }
    if (out.size() != expected) throw DataError("store container: name table is inconsistent");
    return out;
}

}  // namespace detail

// Persists the encoded corpus: vocabulary (terms in id order plus counts)
// and every document's token-id sequence, concatenated with an offset table.
inline void save_store(const std::filesystem::path& path, const DocumentStore& store) {
    const auto& vocab = store.vocabulary();
    Container container;
    container.metadata.vocab_size = vocab.size();
    container.metadata.doc_count = store.num_documents();
    container.metadata.vocabulary_hash = vocab.content_hash();

    container.records.push_back(make_u8_record("vocabulary_terms", detail::join_lines(vocab.terms())));
    container.records.push_back(make_i64_record("collection_frequency", {vocab.size()},
                                                vocab.collection_frequencies().data(), vocab.size()));
    container.records.push_back(make_i64_record("document_frequency", {vocab.size()},
                                                vocab.document_frequencies().data(), vocab.size()));
    const std::int64_t max_size = static_cast<std::int64_t>(vocab.max_size());
    container.records.push_back(make_i64_record("vocabulary_max_size", {1}, &max_size, 1));

    std::vector<std::string> names;
    std::vector<std::int64_t> offsets;
    std::vector<std::int64_t> tokens;
    names.reserve(store.num_documents());
    offsets.reserve(store.num_documents() + 1);
    tokens.reserve(static_cast<std::size_t>(store.total_token_count()));
    offsets.push_back(0);
    for (const auto& doc : store.documents()) {
        names.push_back(doc.external_name);
        for (TermId id : doc.tokens) tokens.push_back(static_cast<std::int64_t>(id));
        offsets.push_back(static_cast<std::int64_t>(tokens.size()));
    }
    container.records.push_back(make_u8_record("document_names", detail::join_lines(names)));
    container.records.push_back(
        make_i64_record("document_offsets", {offsets.size()}, offsets.data(), offsets.size()));
    container.records.push_back(
        make_i64_record("document_tokens", {tokens.size()}, tokens.data(), tokens.size()));
    write_container(path, container);
}

inline DocumentStore load_store(const std::filesystem::path& path) {
    const Container container = read_container(path);
    const auto& md = container.metadata;

    auto terms = detail::split_lines(u8_string(container.require("vocabulary_terms")),
                                     static_cast<std::size_t>(md.vocab_size));
    auto cf = i64_values(container.require("collection_frequency"));
    auto df = i64_values(container.require("document_frequency"));
    const auto max_size_rec = i64_values(container.require("vocabulary_max_size"));
    if (cf.size() != terms.size() || df.size() != terms.size() || max_size_rec.size() != 1) {
        throw DataError("store container is internally inconsistent: " + path.string());
    }
    Vocabulary vocabulary(std::move(terms), std::move(cf), std::move(df),
                          static_cast<std::size_t>(max_size_rec[0]));

    auto names = detail::split_lines(u8_string(container.require("document_names")),
                                     static_cast<std::size_t>(md.doc_count));
    const auto offsets = i64_values(container.require("document_offsets"));
    const auto tokens = i64_values(container.require("document_tokens"));
    if (offsets.size() != names.size() + 1 || offsets.front() != 0 ||
        offsets.back() != static_cast<std::int64_t>(tokens.size())) {
        throw DataError("store container is internally inconsistent: " + path.string());
    }
    std::vector<Document> documents(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        auto& doc = documents[i];
        doc.doc_id = static_cast<DocId>(i);
        doc.external_name = std::move(names[i]);
        if (offsets[i] > offsets[i + 1]) {
            throw DataError("store container is internally inconsistent: " + path.string());
        }
        doc.tokens.reserve(static_cast<std::size_t>(offsets[i + 1] - offsets[i]));
        for (std::int64_t t = offsets[i]; t < offsets[i + 1]; ++t) {
            doc.tokens.push_back(static_cast<TermId>(tokens[static_cast<std::size_t>(t)]));
        }
    }
    return DocumentStore(std::move(documents), std::move(vocabulary));
}

// A model ranks documents of the store it was trained on; pairing it with
// any other store would silently misalign ids.
inline void require_compatible(const ModelParameters& params, const DocumentStore& store) {
    if (params.vocabulary_hash != store.vocabulary().content_hash()) {
        throw DataError("model and store vocabularies do not match");
    }
    if (params.doc_vectors.rows() != store.num_documents()) {
        throw DataError("model and store document counts do not match");
    }
}

}  // namespace nvsm
