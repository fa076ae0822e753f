#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "starsent/fraction.hpp"

namespace starsent::corpus {

struct ReviewRecord {
    std::string id;
    std::string text;
    int rating = 0;  // 1..5
    std::string source;
    std::string lang;  // ISO 639-1, empty until assigned
    size_t word_count = 0;
    // Fields carried over from the raw export (author, date, ...). Present
    // only before anonymization.
    nlohmann::json extras = nlohmann::json::object();
};

struct RecordSet {
    std::vector<ReviewRecord> records;
    std::vector<std::string> provenance;

    size_t size() const { return records.size(); }
    bool has_step(const std::string& step) const;
    void check_unique_ids() const;
};

enum class RemovalReason {
    empty,
    non_alphabetic,
    emoji_only,
    too_long,
    non_target_language,
    duplicate,
};

const char* to_string(RemovalReason r);

struct CleaningLog {
    std::vector<std::pair<std::string, RemovalReason>> removed;
    size_t kept_count = 0;

    std::map<RemovalReason, size_t> counts_by_reason() const;
};

struct SplitSpec {
    Fraction train;
    Fraction eval;
    Fraction test;
    uint64_t seed = 0;
    bool stratify_by_rating = true;

    void validate() const;  // fractions sum to 1 exactly, all non-negative
};

enum class InputFormat { jsonl, csv };

struct SplitResult {
    RecordSet train;
    RecordSet eval;
    RecordSet test;
};

RecordSet ingest(const std::string& path, InputFormat format);

// Drops every field except the contract ones and replaces ids with a
// deterministic digest of (source, original id). A second application is a
// no-op (guarded by provenance).
RecordSet anonymize(const RecordSet& rs);

std::pair<RecordSet, CleaningLog> clean(const RecordSet& rs, size_t max_words = 450);

// Collapses exact duplicates (NFC + case fold + whitespace squeeze) and then
// randomly down-samples over-represented rating classes toward the target
// distribution.
RecordSet dedup_downsample(const RecordSet& rs, const std::map<int, Fraction>& target,
                           uint64_t seed);

// Dedup only (the target = current distribution degenerate case).
std::pair<RecordSet, CleaningLog> dedup(const RecordSet& rs);

SplitResult split(const RecordSet& rs, const SplitSpec& spec);

// Serialization. JSONL carries id, text, rating, source plus lang and
// word_count once computed; CSV uses the same columns with RFC 4180 quoting.
void write_jsonl(const RecordSet& rs, const std::string& path);
std::string record_to_json_line(const ReviewRecord& r);

// Largest-remainder rounding of total into parts proportional to weights.
// Ties go to the earlier part. Exposed for the split tests.
std::vector<size_t> largest_remainder(size_t total, const std::vector<Fraction>& weights);

}  // namespace starsent::corpus
