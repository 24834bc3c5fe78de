#pragma once

#include <algorithm>
#include <string>
#include <vector>

namespace nvsm {

struct RankedEntry {
    std::string doc_name;
    double score = 0.0;
};

// Rank of entries[i] is i+1; construction keeps scores non-increasing and
// document names unique.
struct RankedList {
    std::string query_id;
    std::vector<RankedEntry> entries;
};

// Descending score, ties by ascending name so output bytes are stable.
inline void sort_ranked(std::vector<RankedEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_name < b.doc_name;
    });
}

inline void truncate_ranked(std::vector<RankedEntry>& entries, std::size_t k) {
    if (entries.size() > k) entries.resize(k);
}

}  // namespace nvsm
