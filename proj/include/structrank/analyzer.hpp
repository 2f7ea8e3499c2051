#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace structrank {

// Baseline text analysis: lowercase, split on whitespace and punctuation, no
// stemming, no stopword removal. Word characters are ASCII alphanumerics and
// any byte >= 0x80, so multi-byte UTF-8 sequences stay intact; every other
// byte separates terms.
struct AnalyzerConfig {
    bool lowercase = true;
    bool index_speakers = true; // include speaker names in document token streams
};

inline std::vector<std::string> analyze(std::string_view text, const AnalyzerConfig& config = {}) {
    std::vector<std::string> terms;
    std::string current;
    for (unsigned char c : text) {
        const bool word_char = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                               (c >= 'A' && c <= 'Z') || c >= 0x80;
        if (word_char) {
            if (config.lowercase && c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
            current.push_back(static_cast<char>(c));
        } else if (!current.empty()) {
            terms.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) terms.push_back(std::move(current));
    return terms;
}

} // namespace structrank
