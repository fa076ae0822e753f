#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "starsent/llm_client.hpp"

#include <chrono>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "starsent/hash.hpp"
#include "starsent/model.hpp"

namespace starsent::llm_client {

using nlohmann::json;

namespace {
constexpr const char* kReviewSlot = "{review}";
}

void RemoteConfig::validate() const {
    const size_t first = prompt_template.find(kReviewSlot);
    if (first == std::string::npos) {
        throw std::invalid_argument("prompt template has no {review} slot");
    }
    if (prompt_template.find(kReviewSlot, first + 1) != std::string::npos) {
        throw std::invalid_argument("prompt template has more than one {review} slot");
    }
    if (requests_per_minute < 1) {
        throw std::invalid_argument("requests_per_minute must be positive");
    }
    if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
    if (!(timeout_seconds > 0.0)) throw std::invalid_argument("timeout must be positive");
}

namespace {

class SystemClock : public Clock {
public:
    int64_t now_ms() override {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    }
    void sleep_ms(int64_t ms) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
};

}  // namespace

Clock& system_clock() {
    static SystemClock clock;
    return clock;
}

RateLimiter::RateLimiter(int requests_per_minute, Clock& clock)
    : limit_(requests_per_minute), clock_(clock) {
    if (limit_ < 1) throw std::invalid_argument("requests_per_minute must be positive");
}

int64_t RateLimiter::acquire() {
    constexpr int64_t kWindowMs = 60'000;
    for (;;) {
        const int64_t now = clock_.now_ms();
        while (!window_.empty() && window_.front() <= now - kWindowMs) window_.pop_front();
        if (window_.size() < static_cast<size_t>(limit_)) {
            window_.push_back(now);
            return now;
        }
        clock_.sleep_ms(window_.front() + kWindowMs - now);
    }
}

std::string render_prompt(const std::string& prompt_template, const std::string& review) {
    const size_t pos = prompt_template.find(kReviewSlot);
    if (pos == std::string::npos) {
        throw std::invalid_argument("prompt template has no {review} slot");
    }
    std::string out = prompt_template;
    out.replace(pos, std::string(kReviewSlot).size(), review);
    return out;
}

std::string cache_digest(const std::string& model, const std::string& prompt_template,
                         const std::string& review_text) {
    const std::string key = model + "\x1f" + prompt_template + "\x1f" + review_text;
    // two independent FNV streams for a 128-bit digest
    return hex64(fnv1a64(key)) + hex64(fnv1a64(key, 0x9ae16a3b2f90404full));
}

ResponseCache::ResponseCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;  // cache starts empty
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
            entries_[obj.at("digest").get<std::string>()] =
                obj.at("raw_response").get<std::string>();
        } catch (const json::exception& e) {
            throw std::runtime_error("corrupt cache " + path_ + " at line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::optional<std::string> ResponseCache::lookup(const std::string& digest) const {
    auto it = entries_.find(digest);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::put(const std::string& digest, const std::string& raw_response,
                        int64_t timestamp) {
    entries_[digest] = raw_response;
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to cache " + path_);
    json obj = {{"digest", digest}, {"raw_response", raw_response}, {"timestamp", timestamp}};
    out << obj.dump() << "\n";
    out.flush();
}

namespace {

struct ParsedEndpoint {
    bool https = false;
    std::string host;
    int port = 80;
    std::string path = "/";
};

ParsedEndpoint parse_endpoint(const std::string& url) {
    ParsedEndpoint ep;
    std::string rest;
    if (url.rfind("https://", 0) == 0) {
        ep.https = true;
        ep.port = 443;
        rest = url.substr(8);
    } else if (url.rfind("http://", 0) == 0) {
        rest = url.substr(7);
    } else {
        throw std::invalid_argument("endpoint must start with http:// or https://: " + url);
    }
    const size_t slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    if (slash != std::string::npos) ep.path = rest.substr(slash);
    const size_t colon = hostport.find(':');
    if (colon != std::string::npos) {
        ep.host = hostport.substr(0, colon);
        ep.port = std::stoi(hostport.substr(colon + 1));
    } else {
        ep.host = hostport;
    }
    if (ep.host.empty()) throw std::invalid_argument("endpoint has no host: " + url);
    return ep;
}

bool is_local_endpoint(const ParsedEndpoint& ep) {
    return ep.host == "127.0.0.1" || ep.host == "localhost" || ep.host == "::1";
}

std::string extract_content(const std::string& body) {
    const json doc = json::parse(body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
}

}  // namespace

std::vector<RemoteVerdict> classify_remote(const corpus::RecordSet& rs,
                                           const RemoteConfig& cfg,
                                           const std::string& cache_path, Clock* clock) {
    cfg.validate();
    const ParsedEndpoint ep = parse_endpoint(cfg.endpoint);
    if (cfg.auth_token.empty() && !is_local_endpoint(ep)) {
        throw std::invalid_argument("no auth token set (" + std::string(kAuthTokenEnv) +
                                    ") and endpoint is not local");
    }
    Clock& clk = clock ? *clock : system_clock();
    ResponseCache cache(cache_path);
    RateLimiter limiter(cfg.requests_per_minute, clk);

    std::unique_ptr<httplib::Client> cli;
    auto client = [&]() -> httplib::Client& {
        if (!cli) {
            const std::string base = (ep.https ? "https://" : "http://") + ep.host + ":" +
                                     std::to_string(ep.port);
            cli = std::make_unique<httplib::Client>(base);
            cli->set_connection_timeout(std::chrono::milliseconds(
                static_cast<int64_t>(cfg.timeout_seconds * 1000)));
            cli->set_read_timeout(std::chrono::milliseconds(
                static_cast<int64_t>(cfg.timeout_seconds * 1000)));
            if (!cfg.auth_token.empty()) {
                cli->set_default_headers({{"Authorization", "Bearer " + cfg.auth_token}});
            }
        }
        return *cli;
    };

    std::vector<RemoteVerdict> verdicts;
    verdicts.reserve(rs.records.size());
    for (const auto& r : rs.records) {
        RemoteVerdict v;
        v.id = r.id;
        const std::string digest = cache_digest(cfg.model, cfg.prompt_template, r.text);
        if (auto hit = cache.lookup(digest)) {
            v.raw_response = *hit;
            v.label = model::map_label(v.raw_response);
            v.cached = true;
            verdicts.push_back(std::move(v));
            continue;
        }

        const json request = {{"model", cfg.model},
                              {"messages",
                               json::array({{{"role", "user"},
                                             {"content", render_prompt(cfg.prompt_template,
                                                                       r.text)}}})},
                              {"temperature", 0}};
        const std::string body = request.dump();

        const int64_t start = clk.now_ms();
        bool done = false;
        for (int attempt = 0; attempt <= cfg.max_retries && !done; ++attempt) {
            if (attempt > 0) {
                clk.sleep_ms(500ll << (attempt - 1));  // 0.5s, 1s, 2s, ...
            }
            limiter.acquire();
            ++v.attempts;
            httplib::Result res =
                client().Post(ep.path, body, "application/json");
            if (!res) continue;  // connection failure or timeout: retry
            if (res->status == 401 || res->status == 403) {
                throw std::runtime_error("authentication failed (HTTP " +
                                         std::to_string(res->status) + ")");
            }
            if (res->status == 429 || res->status >= 500) continue;  // transient
            if (res->status != 200) break;  // permanent failure, no retry
            try {
                v.raw_response = extract_content(res->body);
            } catch (const json::exception&) {
                break;  // malformed response body counts as a failed mapping
            }
            v.label = model::map_label(v.raw_response);
            cache.put(digest, v.raw_response, clk.now_ms());
            done = true;
        }
        v.latency_ms = clk.now_ms() - start;
        verdicts.push_back(std::move(v));
    }
    return verdicts;
}

ComparisonReport compare_runs(const std::vector<eval::PredRecord>& local_preds,
                              const std::vector<RemoteVerdict>& remote_verdicts,
                              const std::vector<std::pair<std::string, int>>& truths) {
    std::map<std::string, std::optional<int>> local;
    for (const auto& p : local_preds) local[p.id] = p.pred;
    std::map<std::string, std::optional<int>> remote;
    for (const auto& v : remote_verdicts) remote[v.id] = v.label;

    std::vector<std::string> missing;
    for (const auto& [id, truth] : truths) {
        if (!local.count(id)) missing.push_back(id + " (local)");
        if (!remote.count(id)) missing.push_back(id + " (remote)");
    }
    if (!missing.empty()) {
        std::string msg = "prediction ids missing for:";
        for (const auto& m : missing) msg += " " + m;
        throw std::invalid_argument(msg);
    }

    auto build = [&](const std::map<std::string, std::optional<int>>& preds) {
        std::vector<eval::PredRecord> rows;
        for (const auto& [id, truth] : truths) {
            eval::PredRecord pr;
            pr.id = id;
            pr.truth = truth;
            pr.pred = preds.at(id);
            rows.push_back(std::move(pr));
        }
        return eval::confusion_from_predictions(rows);
    };

    const eval::ConfusionMatrix local_cm = build(local);
    const eval::ConfusionMatrix remote_cm = build(remote);
    std::vector<eval::NamedReport> reports;
    reports.push_back({"local fine-tuned (5-class)", eval::metrics(local_cm), local_cm});
    reports.push_back({"remote model (5-class)", eval::metrics(remote_cm), remote_cm});
    const eval::ConfusionMatrix local3 = eval::collapse(local_cm);
    const eval::ConfusionMatrix remote3 = eval::collapse(remote_cm);
    reports.push_back({"local fine-tuned (3-class)", eval::metrics(local3), local3});
    reports.push_back({"remote model (3-class)", eval::metrics(remote3), remote3});

    ComparisonReport out;
    out.markdown = eval::render_report(reports, eval::ReportFormat::markdown);
    out.json = eval::render_report(reports, eval::ReportFormat::json);
    return out;
}

}  // namespace starsent::llm_client
