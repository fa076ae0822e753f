#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "starsent/corpus.hpp"

namespace starsent::langid {

inline constexpr int kDefaultTopN = 300;
inline constexpr int kMaxNgram = 4;
// Reviews at or below this many words are always routed to manual review.
inline constexpr size_t kShortReviewWords = 5;
// Two profiles closer than this share of the worst-case distance are a toss-up.
inline constexpr double kAmbiguityMargin = 0.05;

// Character n-gram rank profile (n = 1..4) over case-folded, NFC-normalized
// text with word-boundary padding.
struct LangProfile {
    std::string lang;
    int n_max = kMaxNgram;
    int top_n = kDefaultTopN;
    std::unordered_map<std::string, int> ngram_ranks;  // rank 0 = most frequent

    std::string to_json() const;
    static LangProfile from_json(const std::string& serialized);
    void save(const std::string& path) const;
    static LangProfile load(const std::string& path);
};

struct LangVerdict {
    std::string lang = "und";
    int64_t score = 0;  // out-of-place distance, lower is better
    bool ambiguous = false;
};

// N-grams of the text ranked by descending frequency, ties lexicographic,
// truncated to top_n. Shared by training and identification.
std::vector<std::string> ranked_ngrams(const std::string& raw_text, int n_max, int top_n);

LangProfile train_profile(const std::vector<std::string>& corpus, const std::string& lang,
                          int top_n = kDefaultTopN);

LangVerdict identify(const std::string& txt, const std::vector<LangProfile>& profiles);

// Splits rs into records identified as `keep` and everything else (wrong
// language, or short/ambiguous reviews routed to manual inspection).
struct FilterResult {
    corpus::RecordSet kept;
    corpus::RecordSet separated;
    corpus::CleaningLog log;
};

FilterResult filter_language(const corpus::RecordSet& rs, const std::string& keep,
                             const std::vector<LangProfile>& profiles);

}  // namespace starsent::langid
