#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "starsent/corpus.hpp"
#include "starsent/eval.hpp"

namespace starsent::llm_client {

inline constexpr const char* kAuthTokenEnv = "STARSENT_API_TOKEN";

// Bundled prompt, version-tagged so cache keys change when it changes.
inline constexpr const char* kDefaultPromptTemplate =
    "You are rating customer reviews. Read the review below and answer with a "
    "single digit from 1 to 5, where 1 is the most negative and 5 is the most "
    "positive. Answer with the digit only.\n\nReview: {review}";
inline constexpr const char* kPromptVersion = "prompt-v1";

struct RemoteConfig {
    std::string endpoint = "http://127.0.0.1:8080/v1/chat/completions";
    std::string auth_token;  // read from STARSENT_API_TOKEN by the CLI
    std::string model = "gpt-4";
    std::string prompt_template = kDefaultPromptTemplate;
    double timeout_seconds = 30.0;
    int max_retries = 3;
    int requests_per_minute = 60;

    void validate() const;  // exactly one {review} slot, positive limits
};

struct RemoteVerdict {
    std::string id;
    std::string raw_response;
    std::optional<int> label;  // via model::map_label, nullopt on failure
    int64_t latency_ms = 0;
    bool cached = false;
    int attempts = 0;
};

// Injectable clock so the rate limiter and backoff are testable without
// real waiting.
class Clock {
public:
    virtual ~Clock() = default;
    virtual int64_t now_ms() = 0;
    virtual void sleep_ms(int64_t ms) = 0;
};

Clock& system_clock();

class MockClock : public Clock {
public:
    explicit MockClock(int64_t start_ms = 0) : now_(start_ms) {}
    int64_t now_ms() override { return now_; }
    void sleep_ms(int64_t ms) override { now_ += ms; }
    void advance(int64_t ms) { now_ += ms; }

private:
    int64_t now_;
};

// Sliding-window limiter: at most `requests_per_minute` acquisitions in any
// 60-second window, sleeping on the injected clock when saturated.
class RateLimiter {
public:
    RateLimiter(int requests_per_minute, Clock& clock);
    // Blocks until a slot frees up; returns the acquisition timestamp.
    int64_t acquire();

private:
    int limit_;
    Clock& clock_;
    std::deque<int64_t> window_;
};

std::string render_prompt(const std::string& prompt_template, const std::string& review);

// Content digest of (model, prompt template, review text); the cache key.
std::string cache_digest(const std::string& model, const std::string& prompt_template,
                         const std::string& review_text);

// Append-only JSONL response cache: {"digest", "raw_response", "timestamp"}.
class ResponseCache {
public:
    explicit ResponseCache(std::string path);
    std::optional<std::string> lookup(const std::string& digest) const;
    void put(const std::string& digest, const std::string& raw_response, int64_t timestamp);
    size_t size() const { return entries_.size(); }

private:
    std::string path_;
    std::unordered_map<std::string, std::string> entries_;
};

// One verdict per record, cache-first, rate-limited, with exponential backoff
// on 429/5xx/timeouts. Auth failures abort; exhausted retries surface as
// unmapped labels.
std::vector<RemoteVerdict> classify_remote(const corpus::RecordSet& rs,
                                           const RemoteConfig& cfg,
                                           const std::string& cache_path,
                                           Clock* clock = nullptr);

struct ComparisonReport {
    std::string markdown;
    std::string json;
};

// Joint 5-class and collapsed 3-class comparison of a local prediction log
// against remote verdicts over the same ids.
ComparisonReport compare_runs(const std::vector<eval::PredRecord>& local_preds,
                              const std::vector<RemoteVerdict>& remote_verdicts,
                              const std::vector<std::pair<std::string, int>>& truths);

}  // namespace starsent::llm_client
