#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <doctest.h>

#include <atomic>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "starsent/llm_client.hpp"

using namespace starsent;
using nlohmann::json;

namespace {

std::string tmp_path(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove(p);
    return p.string();
}

std::string chat_body(const std::string& content) {
    return json{{"choices", json::array({{{"message", {{"role", "assistant"},
                                                       {"content", content}}}}})}}
        .dump();
}

// Scripted chat-completions endpoint running on a loopback port.
class MockServer {
public:
    MockServer() {
        server_.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         ++hits_;
                         last_body_ = req.body;
                         std::lock_guard<std::mutex> lock(mu_);
                         if (!script_.empty()) {
                             const auto [status, content] = script_.front();
                             script_.pop_front();
                             res.status = status;
                             if (status == 200) {
                                 res.set_content(chat_body(content), "application/json");
                             } else {
                                 res.set_content("scripted failure", "text/plain");
                             }
                             return;
                         }
                         res.status = 200;
                         res.set_content(chat_body(default_reply_), "application/json");
                     });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockServer() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }

    void set_default_reply(const std::string& reply) { default_reply_ = reply; }
    void push_scripted(int status, const std::string& content = "") {
        std::lock_guard<std::mutex> lock(mu_);
        script_.push_back({status, content});
    }
    int hits() const { return hits_.load(); }
    std::string last_body() const { return last_body_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> hits_{0};
    std::string default_reply_ = "3";
    std::string last_body_;
    std::mutex mu_;
    std::deque<std::pair<int, std::string>> script_;
};

corpus::RecordSet sample_records(int n) {
    corpus::RecordSet rs;
    for (int i = 0; i < n; ++i) {
        corpus::ReviewRecord r;
        r.id = "rec" + std::to_string(i);
        r.text = "apžvalgos tekstas numeris " + std::to_string(i);
        r.rating = 1 + i % 5;
        r.source = "t";
        rs.records.push_back(r);
    }
    return rs;
}

llm_client::RemoteConfig mock_config(const MockServer& server) {
    llm_client::RemoteConfig cfg;
    cfg.endpoint = server.endpoint();
    cfg.requests_per_minute = 10000;  // effectively unlimited for these tests
    cfg.max_retries = 3;
    cfg.timeout_seconds = 5.0;
    return cfg;
}

}  // namespace

TEST_CASE("prompt template validation and rendering") {
    llm_client::RemoteConfig cfg;
    CHECK_NOTHROW(cfg.validate());

    cfg.prompt_template = "no slot here";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.prompt_template = "{review} and {review}";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    CHECK(llm_client::render_prompt("Rate: {review}!", "geras") == "Rate: geras!");
}

TEST_CASE("cache digest depends on model, template and text") {
    const auto base = llm_client::cache_digest("m", "t {review}", "text");
    CHECK(base == llm_client::cache_digest("m", "t {review}", "text"));
    CHECK(base != llm_client::cache_digest("m2", "t {review}", "text"));
    CHECK(base != llm_client::cache_digest("m", "u {review}", "text"));
    CHECK(base != llm_client::cache_digest("m", "t {review}", "text2"));
    CHECK(base.size() == 32);
}

TEST_CASE("rate limiter keeps any 60-second window at or below the limit") {
    llm_client::MockClock clock;
    llm_client::RateLimiter limiter(5, clock);
    std::vector<int64_t> stamps;
    for (int i = 0; i < 23; ++i) stamps.push_back(limiter.acquire());
    for (size_t i = 1; i < stamps.size(); ++i) CHECK(stamps[i] >= stamps[i - 1]);
    for (size_t i = 0; i < stamps.size(); ++i) {
        size_t in_window = 0;
        for (size_t j = 0; j < stamps.size(); ++j) {
            if (stamps[j] >= stamps[i] && stamps[j] < stamps[i] + 60'000) ++in_window;
        }
        CHECK(in_window <= 5);
    }
}

TEST_CASE("rate limiter admits bursts below the limit without sleeping") {
    llm_client::MockClock clock(1000);
    llm_client::RateLimiter limiter(10, clock);
    for (int i = 0; i < 10; ++i) CHECK(limiter.acquire() == 1000);
    CHECK(limiter.acquire() == 61'000);  // 11th waits out the window
}

TEST_CASE("response cache persists across instances") {
    const std::string path = tmp_path("llm_cache_rt.jsonl");
    {
        llm_client::ResponseCache cache(path);
        CHECK(!cache.lookup("k1").has_value());
        cache.put("k1", "value one", 123);
        cache.put("k2", "value two", 456);
    }
    llm_client::ResponseCache reloaded(path);
    CHECK(reloaded.size() == 2);
    CHECK(reloaded.lookup("k1") == std::string("value one"));
    CHECK(reloaded.lookup("k2") == std::string("value two"));
}

TEST_CASE("corrupt cache is fatal and names the path") {
    const std::string path = tmp_path("llm_cache_bad.jsonl");
    {
        std::ofstream out(path);
        out << "{\"digest\": \"k\", broken\n";
    }
    CHECK_THROWS_WITH_AS(llm_client::ResponseCache{path}, doctest::Contains(path.c_str()),
                         std::runtime_error);
}

TEST_CASE("classify_remote maps replies through the label mapper") {
    MockServer server;
    server.set_default_reply("3");
    llm_client::MockClock clock;
    const auto verdicts = llm_client::classify_remote(
        sample_records(2), mock_config(server), tmp_path("llm_cache_map.jsonl"), &clock);
    REQUIRE(verdicts.size() == 2);
    for (const auto& v : verdicts) {
        CHECK(v.label == 3);
        CHECK(v.raw_response == "3");
        CHECK(!v.cached);
        CHECK(v.attempts == 1);
    }
    CHECK(server.hits() == 2);

    // the request body is a temperature-0 chat completion with the review
    const auto body = json::parse(server.last_body());
    CHECK(body.at("temperature") == 0);
    CHECK(body.at("messages").at(0).at("role") == "user");
    CHECK(body.at("messages").at(0).at("content").get<std::string>().find(
              "apžvalgos tekstas") != std::string::npos);
}

TEST_CASE("second pass over the same records is served fully from cache") {
    MockServer server;
    server.set_default_reply("5");
    const std::string cache_path = tmp_path("llm_cache_hits.jsonl");
    llm_client::MockClock clock;
    const auto rs = sample_records(4);
    const auto cfg = mock_config(server);

    const auto first = llm_client::classify_remote(rs, cfg, cache_path, &clock);
    CHECK(server.hits() == 4);
    const auto second = llm_client::classify_remote(rs, cfg, cache_path, &clock);
    CHECK(server.hits() == 4);  // zero new network calls
    for (const auto& v : second) {
        CHECK(v.cached);
        CHECK(v.label == 5);
    }
}

TEST_CASE("429 twice then 200 succeeds with three attempts recorded") {
    MockServer server;
    server.push_scripted(429);
    server.push_scripted(429);
    server.push_scripted(200, "2");
    llm_client::MockClock clock;
    const auto verdicts = llm_client::classify_remote(
        sample_records(1), mock_config(server), tmp_path("llm_cache_retry.jsonl"), &clock);
    REQUIRE(verdicts.size() == 1);
    CHECK(verdicts[0].attempts == 3);
    CHECK(verdicts[0].label == 2);
    CHECK(server.hits() == 3);
}

TEST_CASE("exhausted retries leave an unmapped verdict and no cache entry") {
    MockServer server;
    for (int i = 0; i < 4; ++i) server.push_scripted(500);
    const std::string cache_path = tmp_path("llm_cache_fail.jsonl");
    llm_client::MockClock clock;
    const auto verdicts = llm_client::classify_remote(sample_records(1), mock_config(server),
                                                      cache_path, &clock);
    REQUIRE(verdicts.size() == 1);
    CHECK(!verdicts[0].label.has_value());
    CHECK(verdicts[0].attempts == 4);  // initial try + max_retries
    CHECK(llm_client::ResponseCache(cache_path).size() == 0);
}

TEST_CASE("auth failures abort the run") {
    MockServer server;
    server.push_scripted(401);
    llm_client::MockClock clock;
    CHECK_THROWS_WITH_AS(
        llm_client::classify_remote(sample_records(1), mock_config(server),
                                    tmp_path("llm_cache_auth.jsonl"), &clock),
        doctest::Contains("401"), std::runtime_error);
}

TEST_CASE("non-local endpoints require a token") {
    llm_client::RemoteConfig cfg;
    cfg.endpoint = "https://api.example.com/v1/chat/completions";
    corpus::RecordSet rs = sample_records(1);
    CHECK_THROWS_AS(llm_client::classify_remote(rs, cfg, tmp_path("llm_cache_tok.jsonl")),
                    std::invalid_argument);
}

TEST_CASE("cache file never contains review text") {
    MockServer server;
    const std::string cache_path = tmp_path("llm_cache_privacy.jsonl");
    llm_client::MockClock clock;
    llm_client::classify_remote(sample_records(3), mock_config(server), cache_path, &clock);
    std::ifstream in(cache_path);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    CHECK(!content.empty());
    CHECK(content.find("apžvalgos tekstas") == std::string::npos);
}

// ---------------------------------------------------------------------------
// compare_runs
// ---------------------------------------------------------------------------

namespace {

std::vector<std::pair<std::string, int>> truths_of(const corpus::RecordSet& rs) {
    std::vector<std::pair<std::string, int>> out;
    for (const auto& r : rs.records) out.emplace_back(r.id, r.rating);
    return out;
}

}  // namespace

TEST_CASE("identical prediction lists give identical reports") {
    const auto rs = sample_records(10);
    std::vector<eval::PredRecord> local;
    std::vector<llm_client::RemoteVerdict> remote;
    for (const auto& r : rs.records) {
        local.push_back({r.id, r.rating, r.rating});
        llm_client::RemoteVerdict v;
        v.id = r.id;
        v.label = r.rating;
        remote.push_back(v);
    }
    const auto report = llm_client::compare_runs(local, remote, truths_of(rs));
    const auto doc = json::parse(report.json);
    REQUIRE(doc.at("runs").size() == 4);
    for (const auto& run : doc.at("runs")) {
        CHECK(run.at("accuracy").get<double>() == 1.0);
    }
}

TEST_CASE("remote mapping failures give remote accuracy zero") {
    const auto rs = sample_records(8);
    std::vector<eval::PredRecord> local;
    std::vector<llm_client::RemoteVerdict> remote;
    for (const auto& r : rs.records) {
        local.push_back({r.id, r.rating, r.rating});
        llm_client::RemoteVerdict v;
        v.id = r.id;
        v.label = std::nullopt;
        remote.push_back(v);
    }
    const auto report = llm_client::compare_runs(local, remote, truths_of(rs));
    const auto doc = json::parse(report.json);
    for (const auto& run : doc.at("runs")) {
        const std::string name = run.at("name").get<std::string>();
        if (name.find("remote") != std::string::npos) {
            CHECK(run.at("accuracy").get<double>() == 0.0);
        } else {
            CHECK(run.at("accuracy").get<double>() == 1.0);
        }
    }
}

TEST_CASE("fixture logs with hand-counted accuracy") {
    // 20 records; local predicts 15 correctly, remote 8 (counted by
    // construction)
    const auto rs = sample_records(20);
    std::vector<eval::PredRecord> local;
    std::vector<llm_client::RemoteVerdict> remote;
    int i = 0;
    for (const auto& r : rs.records) {
        const int wrong = 1 + (r.rating % 5);
        local.push_back({r.id, r.rating, i % 4 == 3 ? wrong : r.rating});  // 15 of 20 right
        llm_client::RemoteVerdict v;
        v.id = r.id;
        v.label = i % 5 < 2 ? r.rating : wrong;  // 8 of 20 right
        remote.push_back(v);
        ++i;
    }
    const auto report = llm_client::compare_runs(local, remote, truths_of(rs));
    const auto doc = json::parse(report.json);
    double local5 = -1.0, remote5 = -1.0;
    for (const auto& run : doc.at("runs")) {
        const std::string name = run.at("name").get<std::string>();
        if (name == "local fine-tuned (5-class)") local5 = run.at("accuracy").get<double>();
        if (name == "remote model (5-class)") remote5 = run.at("accuracy").get<double>();
    }
    CHECK(std::abs(local5 - 15.0 / 20.0) < 1e-12);
    CHECK(std::abs(remote5 - 8.0 / 20.0) < 1e-12);
}

TEST_CASE("missing ids are listed") {
    const auto rs = sample_records(3);
    std::vector<eval::PredRecord> local = {{"rec0", 1, 1}, {"rec1", 2, 2}};  // rec2 missing
    std::vector<llm_client::RemoteVerdict> remote;
    for (const auto& r : rs.records) {
        llm_client::RemoteVerdict v;
        v.id = r.id;
        v.label = 1;
        remote.push_back(v);
    }
    CHECK_THROWS_WITH_AS(llm_client::compare_runs(local, remote, truths_of(rs)),
                         doctest::Contains("rec2"), std::invalid_argument);
}
