#include "starsent/langid.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "starsent/text.hpp"

namespace starsent::langid {

using nlohmann::json;

namespace {

void count_ngrams(const std::string& raw_text, int n_max,
                  std::unordered_map<std::string, int64_t>& counts) {
    const std::string folded = text::fold_nfc(raw_text);
    for (const std::string& word : text::split_words(folded)) {
        // word-boundary padding: "_word_"
        std::vector<char32_t> cps = text::decode_utf8("_" + word + "_");
        const int len = static_cast<int>(cps.size());
        for (int n = 1; n <= n_max; ++n) {
            for (int i = 0; i + n <= len; ++i) {
                std::string gram;
                for (int k = 0; k < n; ++k) gram += text::encode_utf8(cps[i + k]);
                counts[gram]++;
            }
        }
    }
}

}  // namespace

std::vector<std::string> ranked_ngrams(const std::string& raw_text, int n_max, int top_n) {
    std::unordered_map<std::string, int64_t> counts;
    count_ngrams(raw_text, n_max, counts);
    std::vector<std::pair<std::string, int64_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (items.size() > static_cast<size_t>(top_n)) items.resize(static_cast<size_t>(top_n));
    std::vector<std::string> out;
    out.reserve(items.size());
    for (auto& [gram, count] : items) out.push_back(std::move(gram));
    return out;
}

LangProfile train_profile(const std::vector<std::string>& corpus, const std::string& lang,
                          int top_n) {
    if (corpus.empty()) throw std::invalid_argument("empty corpus for language " + lang);
    if (top_n < 1) throw std::invalid_argument("profile size must be >= 1");
    std::string joined;
    for (const auto& s : corpus) {
        joined += s;
        joined += '\n';
    }
    LangProfile p;
    p.lang = lang;
    p.top_n = top_n;
    const auto ranked = ranked_ngrams(joined, p.n_max, top_n);
    for (size_t i = 0; i < ranked.size(); ++i) {
        p.ngram_ranks[ranked[i]] = static_cast<int>(i);
    }
    return p;
}

LangVerdict identify(const std::string& txt, const std::vector<LangProfile>& profiles) {
    if (profiles.empty()) throw std::invalid_argument("no language profiles given");

    const int top_n = profiles.front().top_n;
    const auto text_ranks = ranked_ngrams(txt, profiles.front().n_max, top_n);

    LangVerdict v;
    if (text_ranks.empty()) {
        v.lang = "und";
        v.ambiguous = true;
        return v;
    }

    // Out-of-place distance: sum of rank differences, with a miss costing the
    // full profile depth.
    std::vector<std::pair<int64_t, std::string>> scores;
    for (const auto& p : profiles) {
        int64_t dist = 0;
        for (size_t i = 0; i < text_ranks.size(); ++i) {
            auto it = p.ngram_ranks.find(text_ranks[i]);
            if (it == p.ngram_ranks.end()) {
                dist += p.top_n;
            } else {
                dist += std::abs(static_cast<int64_t>(i) - it->second);
            }
        }
        scores.emplace_back(dist, p.lang);
    }
    std::sort(scores.begin(), scores.end());

    v.lang = scores[0].second;
    v.score = scores[0].first;
    const int64_t worst_case = static_cast<int64_t>(text_ranks.size()) * top_n;
    if (scores.size() > 1) {
        const int64_t margin = scores[1].first - scores[0].first;
        if (static_cast<double>(margin) < kAmbiguityMargin * static_cast<double>(worst_case)) {
            v.ambiguous = true;
        }
    }
    if (text::word_count(txt) <= kShortReviewWords) v.ambiguous = true;
    return v;
}

FilterResult filter_language(const corpus::RecordSet& rs, const std::string& keep,
                             const std::vector<LangProfile>& profiles) {
    bool have_keep = false;
    for (const auto& p : profiles) have_keep |= (p.lang == keep);
    if (!have_keep) {
        throw std::invalid_argument("no profile for target language '" + keep + "'");
    }

    FilterResult out;
    out.kept.provenance = rs.provenance;
    out.separated.provenance = rs.provenance;
    for (const auto& r : rs.records) {
        LangVerdict v = identify(r.text, profiles);
        corpus::ReviewRecord tagged = r;
        tagged.lang = v.lang;
        if (v.lang == keep && !v.ambiguous) {
            out.kept.records.push_back(std::move(tagged));
        } else {
            out.separated.records.push_back(std::move(tagged));
            out.log.removed.emplace_back(r.id, corpus::RemovalReason::non_target_language);
        }
    }
    out.log.kept_count = out.kept.records.size();
    out.kept.provenance.push_back("langid:keep=" + keep);
    out.separated.provenance.push_back("langid:separated=" + keep);
    return out;
}

std::string LangProfile::to_json() const {
    std::vector<std::pair<int, std::string>> by_rank;
    for (const auto& [gram, rank] : ngram_ranks) by_rank.emplace_back(rank, gram);
    std::sort(by_rank.begin(), by_rank.end());
    json ranks = json::array();
    for (const auto& [rank, gram] : by_rank) ranks.push_back(json::array({gram, rank}));
    json obj = {{"lang", lang}, {"n_max", n_max}, {"top_n", top_n}, {"ranks", ranks}};
    return obj.dump();
}

LangProfile LangProfile::from_json(const std::string& serialized) {
    const json obj = json::parse(serialized);
    LangProfile p;
    p.lang = obj.at("lang").get<std::string>();
    p.n_max = obj.at("n_max").get<int>();
    p.top_n = obj.at("top_n").get<int>();
    for (const auto& entry : obj.at("ranks")) {
        p.ngram_ranks[entry.at(0).get<std::string>()] = entry.at(1).get<int>();
    }
    return p;
}

void LangProfile::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << to_json() << "\n";
}

LangProfile LangProfile::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

}  // namespace starsent::langid
