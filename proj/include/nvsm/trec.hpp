#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nvsm/errors.hpp"
#include "nvsm/ranking.hpp"

namespace nvsm {

// Relevance judgments: (query_id, doc_name) -> grade >= 0. Binary
// relevance means grade > 0. Ordered maps keep emission deterministic.
class Qrels {
  public:
    void add(const std::string& query_id, const std::string& doc_name, int grade) {
        if (grade < 0) throw DataError("qrels: negative grade for " + query_id + "/" + doc_name);
        judgments_[query_id][doc_name] = grade;
    }

    int grade(const std::string& query_id, const std::string& doc_name) const {
        auto q = judgments_.find(query_id);
        if (q == judgments_.end()) return 0;
        auto d = q->second.find(doc_name);
        return d == q->second.end() ? 0 : d->second;
    }

    bool is_relevant(const std::string& query_id, const std::string& doc_name) const {
        return grade(query_id, doc_name) > 0;
    }

    std::size_t num_relevant(const std::string& query_id) const {
        auto q = judgments_.find(query_id);
        if (q == judgments_.end()) return 0;
        std::size_t count = 0;
        for (const auto& [doc, g] : q->second) count += g > 0;
        return count;
    }

    std::vector<std::string> relevant_documents(const std::string& query_id) const {
        std::vector<std::string> out;
        auto q = judgments_.find(query_id);
        if (q == judgments_.end()) return out;
        for (const auto& [doc, g] : q->second) {
            if (g > 0) out.push_back(doc);
        }
        return out;
    }

    std::vector<int> relevant_grades(const std::string& query_id) const {
        std::vector<int> out;
        auto q = judgments_.find(query_id);
        if (q == judgments_.end()) return out;
        for (const auto& [doc, g] : q->second) {
            if (g > 0) out.push_back(g);
        }
        return out;
    }

    const std::map<std::string, std::map<std::string, int>>& judgments() const {
        return judgments_;
    }

  private:
    std::map<std::string, std::map<std::string, int>> judgments_;
};

struct Topic {
    std::string query_id;
    std::string title;
};

namespace detail {

inline std::vector<std::string> whitespace_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::istringstream in(line);
    std::string field;
    while (in >> field) fields.push_back(field);
    return fields;
}

inline double parse_double(const std::string& text, const std::string& what, std::size_t line) {
    std::size_t pos = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size()) {
        throw DataError(what + ": line " + std::to_string(line) + ": bad number '" + text + "'");
    }
    return value;
}

inline long parse_int(const std::string& text, const std::string& what, std::size_t line) {
    std::size_t pos = 0;
    long value = 0;
    try {
        value = std::stol(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size()) {
        throw DataError(what + ": line " + std::to_string(line) + ": bad integer '" + text + "'");
    }
    return value;
}

}  // namespace detail

// `query_id 0 doc_name grade`, whitespace separated.
inline Qrels read_qrels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open qrels: " + path.string());
    Qrels qrels;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::whitespace_fields(line);
        if (fields.size() != 4) {
            throw DataError("qrels: line " + std::to_string(line_number) + ": expected 4 fields");
        }
        const long grade = detail::parse_int(fields[3], "qrels", line_number);
        if (grade < 0) {
            throw DataError("qrels: line " + std::to_string(line_number) + ": negative grade");
        }
        qrels.add(fields[0], fields[2], static_cast<int>(grade));
    }
    return qrels;
}

inline void write_qrels(std::ostream& out, const Qrels& qrels) {
    for (const auto& [query_id, docs] : qrels.judgments()) {
        for (const auto& [doc, grade] : docs) {
            out << query_id << " 0 " << doc << " " << grade << "\n";
        }
    }
}

struct Run {
    std::string tag;
    std::vector<RankedList> lists;
};

// One line per entry: `query_id Q0 doc_name rank score run_tag`, scores
// with 6 decimals, ranks from 1, single spaces. The writer re-derives rank
// from position, so write(parse(x)) == x for any file this writer produced.
inline void write_run(std::ostream& out, const Run& run) {
    char score_text[64];
    for (const auto& list : run.lists) {
        for (std::size_t i = 0; i < list.entries.size(); ++i) {
            std::snprintf(score_text, sizeof score_text, "%.6f", list.entries[i].score);
            out << list.query_id << " Q0 " << list.entries[i].doc_name << " " << (i + 1) << " "
                << score_text << " " << run.tag << "\n";
        }
    }
}

inline void write_run(const std::filesystem::path& path, const Run& run) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    write_run(out, run);
    if (!out) throw DataError("failed writing: " + path.string());
}

inline Run read_run(std::istream& in, const std::string& what) {
    Run run;
    std::string line;
    std::size_t line_number = 0;
    RankedList* current = nullptr;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::whitespace_fields(line);
        if (fields.size() != 6) {
            throw DataError(what + ": line " + std::to_string(line_number) + ": expected 6 fields");
        }
        const double score = detail::parse_double(fields[4], what, line_number);
        if (run.tag.empty()) run.tag = fields[5];
        if (!current || current->query_id != fields[0]) {
            for (const auto& list : run.lists) {
                if (list.query_id == fields[0]) {
                    throw DataError(what + ": line " + std::to_string(line_number) +
                                    ": query '" + fields[0] + "' is not contiguous");
                }
            }
            run.lists.push_back({fields[0], {}});
            current = &run.lists.back();
        }
        current->entries.push_back({fields[2], score});
    }
    return run;
}

inline Run read_run(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open run file: " + path.string());
    return read_run(in, "run file " + path.string());
}

// `query_id<TAB>title text`, one topic per line.
inline std::vector<Topic> read_topics(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open topics file: " + path.string());
    std::vector<Topic> topics;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw DataError("topics: line " + std::to_string(line_number) +
                            ": expected query_id<TAB>title");
        }
        topics.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return topics;
}

}  // namespace nvsm
