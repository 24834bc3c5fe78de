#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nvsm/errors.hpp"
#include "nvsm/hash.hpp"
#include "nvsm/parallel.hpp"

namespace nvsm {

using TermId = std::uint32_t;
using DocId = std::uint32_t;

inline constexpr std::size_t kDefaultMaxVocabulary = 60000;

struct RawDocument {
    std::string external_name;
    std::string text;
};

struct TokenizedDocument {
    std::string external_name;
    std::vector<std::string> tokens;
};

// Lowercased alphanumeric runs, stopwords removed. Split happens on every
// non-alphanumeric byte, so "re-entry" yields {"re", "entry"}.
inline std::vector<std::string> tokenize(std::string_view text,
                                         const std::unordered_set<std::string>& stopwords) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            if (!stopwords.contains(current)) out.push_back(current);
            current.clear();
        }
    };
    for (unsigned char c : text) {
        if (c >= 'A' && c <= 'Z') {
            current.push_back(static_cast<char>(c - 'A' + 'a'));
        } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            current.push_back(static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

class Vocabulary {
  public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> terms,
               std::vector<std::int64_t> collection_frequency,
               std::vector<std::int64_t> document_frequency,
               std::size_t max_size)
        : terms_(std::move(terms)),
          collection_frequency_(std::move(collection_frequency)),
          document_frequency_(std::move(document_frequency)),
          max_size_(max_size) {
        term_to_id_.reserve(terms_.size());
        for (TermId id = 0; id < terms_.size(); ++id) term_to_id_.emplace(terms_[id], id);
    }

    std::size_t size() const { return terms_.size(); }
    std::size_t max_size() const { return max_size_; }
    const std::string& term(TermId id) const { return terms_[id]; }
    const std::vector<std::string>& terms() const { return terms_; }

    std::optional<TermId> find(std::string_view term) const {
        auto it = term_to_id_.find(std::string(term));
        if (it == term_to_id_.end()) return std::nullopt;
        return it->second;
    }

    std::int64_t collection_frequency(TermId id) const { return collection_frequency_[id]; }
    std::int64_t document_frequency(TermId id) const { return document_frequency_[id]; }
    const std::vector<std::int64_t>& collection_frequencies() const { return collection_frequency_; }
    const std::vector<std::int64_t>& document_frequencies() const { return document_frequency_; }

    // Fingerprint of the ordered term list; models carry it so a model
    // cannot silently be paired with a store it was not trained on.
    std::uint64_t content_hash() const {
        std::uint64_t h = kFnvOffset;
        for (const auto& t : terms_) {
            h = fnv1a64(t, h);
            h = fnv1a64("\n", h);
        }
        return h;
    }

  private:
    std::vector<std::string> terms_;
    std::unordered_map<std::string, TermId> term_to_id_;
    std::vector<std::int64_t> collection_frequency_;
    std::vector<std::int64_t> document_frequency_;
    std::size_t max_size_ = kDefaultMaxVocabulary;
};

struct Document {
    DocId doc_id = 0;
    std::string external_name;
    std::vector<TermId> tokens;  // in-vocabulary only, OOV dropped at encode time

    std::size_t length() const { return tokens.size(); }
};

class DocumentStore {
  public:
    DocumentStore() = default;
    DocumentStore(std::vector<Document> documents, Vocabulary vocabulary)
        : documents_(std::move(documents)), vocabulary_(std::move(vocabulary)) {
        name_to_id_.reserve(documents_.size());
        for (const auto& doc : documents_) {
            total_token_count_ += doc.length();
            name_to_id_.emplace(doc.external_name, doc.doc_id);
        }
    }

    std::size_t num_documents() const { return documents_.size(); }
    const Document& document(DocId id) const { return documents_[id]; }
    const std::vector<Document>& documents() const { return documents_; }
    const Vocabulary& vocabulary() const { return vocabulary_; }
    std::int64_t total_token_count() const { return total_token_count_; }

    std::optional<DocId> find_document(std::string_view external_name) const {
        auto it = name_to_id_.find(std::string(external_name));
        if (it == name_to_id_.end()) return std::nullopt;
        return it->second;
    }

  private:
    std::vector<Document> documents_;
    Vocabulary vocabulary_;
    std::unordered_map<std::string, DocId> name_to_id_;
    std::int64_t total_token_count_ = 0;
};

inline std::vector<TokenizedDocument> tokenize_corpus(
    const std::vector<RawDocument>& raw,
    const std::unordered_set<std::string>& stopwords,
    unsigned workers = 1) {
    std::vector<TokenizedDocument> out(raw.size());
    parallel_for(raw.size(), workers, [&](std::size_t i) {
        out[i] = {raw[i].external_name, tokenize(raw[i].text, stopwords)};
    });
    return out;
}

// Retains the max_size most frequent terms; ties at the cutoff (and anywhere
// else) break lexicographically ascending, so the retained set and the id
// order are both deterministic.
inline Vocabulary build_vocabulary(const std::vector<TokenizedDocument>& docs,
                                   std::size_t max_size = kDefaultMaxVocabulary) {
    if (max_size == 0) throw UsageError("build_vocabulary: max_size must be positive");
    std::unordered_map<std::string, std::int64_t> counts;
    std::unordered_map<std::string, std::int64_t> doc_counts;
    std::unordered_set<std::string_view> seen_in_doc;
    for (const auto& doc : docs) {
        for (const auto& tok : doc.tokens) ++counts[tok];
        seen_in_doc.clear();
        for (const auto& tok : doc.tokens) {
            if (seen_in_doc.insert(tok).second) ++doc_counts[tok];
        }
    }
    if (counts.empty()) throw DataError("build_vocabulary: no tokens survive tokenization");

    std::vector<std::pair<std::string_view, std::int64_t>> order(counts.begin(), counts.end());
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (order.size() > max_size) order.resize(max_size);

    std::vector<std::string> terms;
    std::vector<std::int64_t> cf;
    std::vector<std::int64_t> df;
    terms.reserve(order.size());
    cf.reserve(order.size());
    df.reserve(order.size());
    for (const auto& [term, count] : order) {
        terms.emplace_back(term);
        cf.push_back(count);
        df.push_back(doc_counts.at(std::string(term)));
    }
    return Vocabulary(std::move(terms), std::move(cf), std::move(df), max_size);
}

// Maps tokens to ids and drops OOV tokens. Documents that become empty are
// kept, so doc ids stay dense and every document owns a vector.
inline DocumentStore encode_corpus(const std::vector<TokenizedDocument>& docs,
                                   Vocabulary vocabulary,
                                   unsigned workers = 1) {
    if (docs.empty()) throw DataError("encode_corpus: empty corpus");
    std::unordered_set<std::string_view> names;
    names.reserve(docs.size());
    for (const auto& doc : docs) {
        if (!names.insert(doc.external_name).second) {
            throw DataError("encode_corpus: duplicate external name '" + doc.external_name + "'");
        }
    }
    std::vector<Document> encoded(docs.size());
    parallel_for(docs.size(), workers, [&](std::size_t i) {
        Document d;
        d.doc_id = static_cast<DocId>(i);
        d.external_name = docs[i].external_name;
        d.tokens.reserve(docs[i].tokens.size());
        for (const auto& tok : docs[i].tokens) {
            if (auto id = vocabulary.find(tok)) d.tokens.push_back(*id);
        }
        encoded[i] = std::move(d);
    });
    return DocumentStore(std::move(encoded), std::move(vocabulary));
}

inline DocumentStore ingest_corpus(const std::vector<RawDocument>& raw,
                                   const std::unordered_set<std::string>& stopwords,
                                   std::size_t max_vocabulary = kDefaultMaxVocabulary,
                                   unsigned workers = 1) {
    auto tokenized = tokenize_corpus(raw, stopwords, workers);
    auto vocabulary = build_vocabulary(tokenized, max_vocabulary);
    return encode_corpus(tokenized, std::move(vocabulary), workers);
}

inline std::unordered_set<std::string> load_stopwords(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open stopword file: " + path.string());
    std::unordered_set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto tokens = tokenize(line, {});
        for (auto& t : tokens) out.insert(std::move(t));
    }
    return out;
}

// Directory layout: one plain-text file per document, filename (including
// any extension) is the external name. Files are visited in name order.
inline std::vector<RawDocument> read_corpus_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw DataError("corpus path is not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
        return a.filename().string() < b.filename().string();
    });
    std::vector<RawDocument> out;
    out.reserve(files.size());
    for (const auto& file : files) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw DataError("cannot open corpus file: " + file.string());
        std::ostringstream text;
        text << in.rdbuf();
        out.push_back({file.filename().string(), text.str()});
    }
    return out;
}

// Line-delimited format: external_name<TAB>text.
inline std::vector<RawDocument> read_corpus_tsv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus file: " + path.string());
    std::vector<RawDocument> out;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw DataError("malformed corpus line " + std::to_string(line_number) +
                            ": expected external_name<TAB>text");
        }
        out.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return out;
}

inline std::vector<RawDocument> read_corpus(const std::filesystem::path& path) {
    return std::filesystem::is_directory(path) ? read_corpus_directory(path)
                                               : read_corpus_tsv(path);
}

}  // namespace nvsm
