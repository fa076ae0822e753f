#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "starsent/langid.hpp"
#include "starsent/text.hpp"

using namespace starsent;

namespace {

const std::string kFixtures = STARSENT_FIXTURE_DIR;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<langid::LangProfile> fixture_profiles() {
    return {
        langid::train_profile({slurp(kFixtures + "/langid/lt.txt")}, "lt"),
        langid::train_profile({slurp(kFixtures + "/langid/en.txt")}, "en"),
        langid::train_profile({slurp(kFixtures + "/langid/ru.txt")}, "ru"),
    };
}

}  // namespace

TEST_CASE("profile of a single-symbol corpus is led by that symbol") {
    const auto p = langid::train_profile({"aaa"}, "xx", 2);
    REQUIRE(p.ngram_ranks.count("a"));
    CHECK(p.ngram_ranks.at("a") == 0);  // "a" occurs 3 times, more than any other gram
}

TEST_CASE("identical corpora give identical profiles") {
    const auto a = langid::train_profile({"labas rytas", "kaip sekasi"}, "lt", 50);
    const auto b = langid::train_profile({"labas rytas", "kaip sekasi"}, "lt", 50);
    CHECK(a.ngram_ranks == b.ngram_ranks);
}

TEST_CASE("empty corpus is rejected") {
    CHECK_THROWS_AS(langid::train_profile({}, "lt"), std::invalid_argument);
}

TEST_CASE("top-20 1-grams of the Lithuanian and English fixtures differ") {
    // frequency-count oracle: recount 1-grams directly from the folded text
    auto top20_1grams = [](const std::string& raw) {
        std::map<std::string, long> counts;
        const std::string folded = text::fold_nfc(raw);
        for (const std::string& word : text::split_words(folded)) {
            for (char32_t cp : text::decode_utf8("_" + word + "_")) {
                counts[text::encode_utf8(cp)]++;
            }
        }
        std::vector<std::pair<long, std::string>> items;
        for (const auto& [g, c] : counts) items.emplace_back(-c, g);
        std::sort(items.begin(), items.end());
        std::set<std::string> top;
        for (size_t i = 0; i < items.size() && i < 20; ++i) top.insert(items[i].second);
        return top;
    };
    const auto lt_top = top20_1grams(slurp(kFixtures + "/langid/lt.txt"));
    const auto en_top = top20_1grams(slurp(kFixtures + "/langid/en.txt"));
    CHECK(lt_top != en_top);

    // and the trained profiles agree with the oracle on those 1-grams
    const auto lt_profile = langid::train_profile({slurp(kFixtures + "/langid/lt.txt")}, "lt");
    size_t found = 0;
    for (const auto& g : lt_top) found += lt_profile.ngram_ranks.count(g);
    CHECK(found == lt_top.size());
}

TEST_CASE("identify matches a profile against its own training text") {
    const std::string corpus = "labas rytas kaip tau sekasi šiandien drauge";
    const auto own = langid::train_profile({corpus}, "lt", 100);
    const auto other = langid::train_profile({"good morning how are you today friend"}, "en", 100);
    const auto v = langid::identify(corpus, {own, other});
    CHECK(v.lang == "lt");
}

TEST_CASE("empty text gives und and ambiguous") {
    const auto v = langid::identify("", fixture_profiles());
    CHECK(v.lang == "und");
    CHECK(v.ambiguous);
    CHECK_NOTHROW(langid::identify("   ", fixture_profiles()));
}

TEST_CASE("identify requires at least one profile") {
    CHECK_THROWS_AS(langid::identify("tekstas", {}), std::invalid_argument);
}

TEST_CASE("short reviews are always flagged ambiguous") {
    const auto v = langid::identify("labai gera preke tikrai", fixture_profiles());
    CHECK(v.ambiguous);  // 4 words <= 5
}

TEST_CASE("held-out fixture reviews: at least 18 of 20 identified correctly") {
    const auto profiles = fixture_profiles();
    std::ifstream in(kFixtures + "/langid/reviews_labeled.jsonl");
    REQUIRE(in.good());
    std::string line;
    int total = 0;
    int correct = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto obj = nlohmann::json::parse(line);
        const auto v = langid::identify(obj.at("text").get<std::string>(), profiles);
        ++total;
        if (v.lang == obj.at("lang").get<std::string>()) ++correct;
    }
    CHECK(total == 20);
    CHECK(correct >= 18);
}

TEST_CASE("identify is deterministic") {
    const auto profiles = fixture_profiles();
    const std::string txt = "šis tekstas yra lietuviškas ir gana ilgas patikimam spėjimui";
    const auto a = langid::identify(txt, profiles);
    const auto b = langid::identify(txt, profiles);
    CHECK(a.lang == b.lang);
    CHECK(a.score == b.score);
    CHECK(a.ambiguous == b.ambiguous);
}

TEST_CASE("filter_language partitions the input exactly") {
    corpus::RecordSet rs;
    const std::vector<std::pair<std::string, std::string>> rows = {
        {"lt", "Puikus aptarnavimas, prekė atkeliavo laiku ir buvo tvarkingai supakuota."},
        {"en", "The delivery took forever and nobody responded to any of my emails."},
        {"ru", "Очень плохой сервис, никому не советую этот магазин вообще."},
        {"lt", "Kaina gera."},  // short: routed to manual review
    };
    int i = 0;
    for (const auto& [lang, txt] : rows) {
        corpus::ReviewRecord r;
        r.id = "r" + std::to_string(i++);
        r.text = txt;
        r.rating = 4;
        r.source = "t";
        r.word_count = text::word_count(txt);
        rs.records.push_back(r);
    }
    const auto res = langid::filter_language(rs, "lt", fixture_profiles());
    CHECK(res.kept.size() + res.separated.size() == rs.size());
    CHECK(res.kept.size() == 1);
    CHECK(res.kept.records[0].id == "r0");
    CHECK(res.kept.records[0].lang == "lt");
    std::set<std::string> separated_ids;
    for (const auto& r : res.separated.records) separated_ids.insert(r.id);
    CHECK(separated_ids == std::set<std::string>{"r1", "r2", "r3"});
    CHECK(res.log.removed.size() == 3);
    for (const auto& [id, reason] : res.log.removed) {
        CHECK(reason == corpus::RemovalReason::non_target_language);
    }
}

TEST_CASE("filter_language needs a profile for the target language") {
    corpus::RecordSet rs;
    CHECK_THROWS_AS(langid::filter_language(rs, "fr", fixture_profiles()),
                    std::invalid_argument);
}

TEST_CASE("profile json round trip") {
    const auto p = langid::train_profile({slurp(kFixtures + "/langid/lt.txt")}, "lt", 120);
    const auto q = langid::LangProfile::from_json(p.to_json());
    CHECK(q.lang == p.lang);
    CHECK(q.top_n == p.top_n);
    CHECK(q.n_max == p.n_max);
    CHECK(q.ngram_ranks == p.ngram_ranks);
}

TEST_CASE("out-of-place distance is symmetric for equal-length rank lists") {
    // Distance between two rank lists of the same length, computed both ways.
    const std::string a = "vilnius kaunas klaipeda siauliai panevezys";
    const std::string b = "london manchester liverpool birmingham leeds";
    const int top_n = 64;
    const auto ra = langid::ranked_ngrams(a, 4, top_n);
    const auto rb = langid::ranked_ngrams(b, 4, top_n);
    const size_t n = std::min(ra.size(), rb.size());

    auto distance = [&](const std::vector<std::string>& from,
                        const std::vector<std::string>& to) {
        std::map<std::string, int> rank_to;
        for (size_t i = 0; i < n; ++i) rank_to[to[i]] = static_cast<int>(i);
        long dist = 0;
        for (size_t i = 0; i < n; ++i) {
            auto it = rank_to.find(from[i]);
            dist += it == rank_to.end() ? static_cast<long>(n)
                                        : std::abs(static_cast<long>(i) - it->second);
        }
        return dist;
    };
    CHECK(distance(ra, rb) == distance(rb, ra));
}
