#include "starsent/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "starsent/hash.hpp"
#include "starsent/rng.hpp"
#include "starsent/text.hpp"

namespace starsent::corpus {

using nlohmann::json;

const char* to_string(RemovalReason r) {
    switch (r) {
        case RemovalReason::empty: return "empty";
        case RemovalReason::non_alphabetic: return "non_alphabetic";
        case RemovalReason::emoji_only: return "emoji_only";
        case RemovalReason::too_long: return "too_long";
        case RemovalReason::non_target_language: return "non_target_language";
        case RemovalReason::duplicate: return "duplicate";
    }
    return "?";
}

bool RecordSet::has_step(const std::string& step) const {
    for (const auto& p : provenance) {
        if (p.substr(0, step.size()) == step) return true;
    }
    return false;
}

void RecordSet::check_unique_ids() const {
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.id).second) {
            throw std::invalid_argument("duplicate record id: " + r.id);
        }
    }
}

std::map<RemovalReason, size_t> CleaningLog::counts_by_reason() const {
    std::map<RemovalReason, size_t> counts;
    for (const auto& [id, reason] : removed) counts[reason]++;
    return counts;
}

void SplitSpec::validate() const {
    const Fraction sum = train + eval + test;
    if (!(sum == Fraction(1, 1))) {
        throw std::invalid_argument("split fractions must sum to 1 exactly");
    }
    if (train.num <= 0 || eval.num <= 0 || test.num <= 0) {
        throw std::invalid_argument("split fractions must be positive");
    }
}

namespace {

ReviewRecord record_from_json(const json& obj, size_t line_no) {
    ReviewRecord r;
    if (!obj.is_object()) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": not a JSON object");
    }
    for (const char* key : {"id", "text", "rating", "source"}) {
        if (!obj.contains(key)) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": missing key '" +
                                     key + "'");
        }
    }
    r.id = obj.at("id").is_string() ? obj.at("id").get<std::string>()
                                    : obj.at("id").dump();
    if (!obj.at("text").is_string()) {
        throw std::runtime_error("line " + std::to_string(line_no) + ": 'text' must be a string");
    }
    r.text = obj.at("text").get<std::string>();
    if (!obj.at("rating").is_number_integer()) {
        throw std::invalid_argument("record " + r.id + " (line " + std::to_string(line_no) +
                                    "): rating must be an integer");
    }
    const int64_t rating = obj.at("rating").get<int64_t>();
    if (rating < 1 || rating > 5) {
        throw std::invalid_argument("record " + r.id + " (line " + std::to_string(line_no) +
                                    "): rating " + std::to_string(rating) +
                                    " outside 1..5");
    }
    r.rating = static_cast<int>(rating);
    r.source = obj.at("source").is_string() ? obj.at("source").get<std::string>()
                                            : obj.at("source").dump();
    if (obj.contains("lang") && obj.at("lang").is_string()) {
        r.lang = obj.at("lang").get<std::string>();
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string& k = it.key();
        if (k == "id" || k == "text" || k == "rating" || k == "source" || k == "lang" ||
            k == "word_count") {
            continue;
        }
        r.extras[k] = it.value();
    }
    r.word_count = text::word_count(r.text);
    return r;
}

// RFC 4180 CSV: quoted fields with "" escapes, embedded newlines allowed.
std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    size_t i = 0;
    while (i < content.size()) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
        } else {
            field += c;
        }
        ++i;
    }
    if (!field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

RecordSet ingest_csv(const std::string& path, const std::string& content) {
    const auto rows = parse_csv(content);
    if (rows.empty()) throw std::runtime_error(path + ": empty CSV file");
    const auto& header = rows[0];
    std::unordered_map<std::string, size_t> col;
    for (size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* key : {"id", "text", "rating", "source"}) {
        if (!col.count(key)) {
            throw std::runtime_error(path + ": CSV header missing column '" + std::string(key) +
                                     "'");
        }
    }
    RecordSet rs;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& cells = rows[i];
        const size_t line_no = i + 1;
        if (cells.size() != header.size()) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(header.size()) +
                                     " fields, got " + std::to_string(cells.size()));
        }
        json obj = json::object();
        for (size_t c = 0; c < header.size(); ++c) obj[header[c]] = cells[c];
        // rating arrives as text in CSV
        try {
            obj["rating"] = std::stoll(cells[col["rating"]]);
        } catch (const std::exception&) {
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": rating is not an integer");
        }
        rs.records.push_back(record_from_json(obj, line_no));
    }
    return rs;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

RecordSet ingest(const std::string& path, InputFormat format) {
    const std::string content = read_file(path);
    if (!text::is_valid_utf8(content)) {
        throw std::runtime_error(path + ": not valid UTF-8");
    }
    RecordSet rs;
    if (format == InputFormat::jsonl) {
        std::istringstream in(content);
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json obj;
            try {
                obj = json::parse(line);
            } catch (const json::parse_error& e) {
                throw std::runtime_error("line " + std::to_string(line_no) +
                                         ": JSON parse error: " + e.what());
            }
            rs.records.push_back(record_from_json(obj, line_no));
        }
    } else {
        rs = ingest_csv(path, content);
    }
    rs.check_unique_ids();
    rs.provenance.push_back("ingest:" + path);
    return rs;
}

RecordSet anonymize(const RecordSet& rs) {
    if (rs.has_step("anonymize")) {
        RecordSet out = rs;
        out.provenance.push_back("anonymize:noop");
        return out;
    }
    RecordSet out;
    out.provenance = rs.provenance;
    out.records.reserve(rs.records.size());
    for (const auto& r : rs.records) {
        ReviewRecord a;
        a.id = hex64(fnv1a64(r.source + "\x1f" + r.id));
        a.text = r.text;
        a.rating = r.rating;
        a.source = r.source;
        a.lang = r.lang;
        a.word_count = r.word_count;
        out.records.push_back(std::move(a));
    }
    out.check_unique_ids();
    out.provenance.push_back("anonymize");
    return out;
}

std::pair<RecordSet, CleaningLog> clean(const RecordSet& rs, size_t max_words) {
    if (max_words < 1) throw std::invalid_argument("max_words must be >= 1");
    RecordSet out;
    out.provenance = rs.provenance;
    CleaningLog log;
    for (const auto& r : rs.records) {
        const std::string trimmed = text::trim(r.text);
        if (trimmed.empty()) {
            log.removed.emplace_back(r.id, RemovalReason::empty);
            continue;
        }
        bool has_letter = false;
        bool all_symbolic = true;
        for (char32_t cp : text::decode_utf8(trimmed)) {
            if (text::is_letter(cp)) {
                has_letter = true;
                break;
            }
            if (!text::is_space(cp) && !text::is_symbol_or_emoji(cp)) all_symbolic = false;
        }
        if (!has_letter) {
            log.removed.emplace_back(r.id, all_symbolic ? RemovalReason::emoji_only
                                                        : RemovalReason::non_alphabetic);
            continue;
        }
        if (r.word_count > max_words) {
            log.removed.emplace_back(r.id, RemovalReason::too_long);
            continue;
        }
        out.records.push_back(r);
    }
    log.kept_count = out.records.size();
    out.provenance.push_back("clean:max_words=" + std::to_string(max_words));
    return {std::move(out), std::move(log)};
}

namespace {

// Duplicate = same normalized text AND same rating; the same wording under a
// different star label stays, so no (text, rating) class loses its last
// representative.
std::string dedup_key(const ReviewRecord& r) {
    return std::to_string(r.rating) + "\x1f" +
           text::squeeze_whitespace(text::fold_nfc(r.text));
}

}  // namespace

std::pair<RecordSet, CleaningLog> dedup(const RecordSet& rs) {
    RecordSet out;
    out.provenance = rs.provenance;
    CleaningLog log;
    std::unordered_set<std::string> seen;
    for (const auto& r : rs.records) {
        if (seen.insert(dedup_key(r)).second) {
            out.records.push_back(r);
        } else {
            log.removed.emplace_back(r.id, RemovalReason::duplicate);
        }
    }
    log.kept_count = out.records.size();
    out.provenance.push_back("dedup");
    return {std::move(out), std::move(log)};
}

RecordSet dedup_downsample(const RecordSet& rs, const std::map<int, Fraction>& target,
                           uint64_t seed) {
    Fraction sum(0, 1);
    for (const auto& [rating, f] : target) sum = sum + f;
    if (!(sum == Fraction(1, 1))) {
        throw std::invalid_argument("target fractions must sum to 1 exactly");
    }

    auto [deduped, dlog] = dedup(rs);

    std::map<int, std::vector<size_t>> by_rating;
    for (size_t i = 0; i < deduped.records.size(); ++i) {
        by_rating[deduped.records[i].rating].push_back(i);
    }
    for (const auto& [rating, f] : target) {
        if (f.num > 0 && !by_rating.count(rating)) {
            throw std::invalid_argument("class " + std::to_string(rating) +
                                        " has no records but a positive target share");
        }
    }

    // Largest total size at which every class can reach its target share by
    // removal only: min over classes of n_c * den_c / num_c.
    size_t total = deduped.records.size();
    for (const auto& [rating, f] : target) {
        if (f.num <= 0) continue;
        const size_t n_c = by_rating.count(rating) ? by_rating[rating].size() : 0;
        const auto cap = static_cast<size_t>((static_cast<__int128>(n_c) * f.den) / f.num);
        total = std::min(total, cap);
    }

    std::vector<int> ratings;
    std::vector<Fraction> weights;
    for (const auto& [rating, f] : target) {
        ratings.push_back(rating);
        weights.push_back(f);
    }
    std::vector<size_t> alloc = largest_remainder(total, weights);

    // Rounding may push a class 1 past its available count; shift the excess
    // to classes with slack.
    for (size_t i = 0; i < ratings.size(); ++i) {
        const size_t avail = by_rating.count(ratings[i]) ? by_rating[ratings[i]].size() : 0;
        while (alloc[i] > avail) {
            --alloc[i];
            for (size_t j = 0; j < ratings.size(); ++j) {
                const size_t avail_j =
                    by_rating.count(ratings[j]) ? by_rating[ratings[j]].size() : 0;
                if (alloc[j] < avail_j) {
                    ++alloc[j];
                    break;
                }
            }
        }
    }

    std::set<size_t> kept;
    for (size_t i = 0; i < ratings.size(); ++i) {
        auto it = by_rating.find(ratings[i]);
        if (it == by_rating.end()) continue;
        std::vector<size_t> idx = it->second;
        if (alloc[i] < idx.size()) {
            Rng rng(derive_seed(seed, "downsample:" + std::to_string(ratings[i])));
            rng.shuffle(idx);
            idx.resize(alloc[i]);
        }
        kept.insert(idx.begin(), idx.end());
    }
    // Ratings absent from the target map are dropped (share zero).

    RecordSet out;
    out.provenance = deduped.provenance;
    for (size_t i = 0; i < deduped.records.size(); ++i) {
        if (kept.count(i)) out.records.push_back(deduped.records[i]);
    }
    out.provenance.push_back("downsample:seed=" + std::to_string(seed));
    return out;
}

std::vector<size_t> largest_remainder(size_t total, const std::vector<Fraction>& weights) {
    const size_t k = weights.size();
    std::vector<size_t> alloc(k, 0);
    // remainder of share_i = total*num/den, kept exact as (num_part, den)
    std::vector<std::pair<__int128, int64_t>> rem(k);
    size_t assigned = 0;
    for (size_t i = 0; i < k; ++i) {
        const __int128 prod = static_cast<__int128>(total) * weights[i].num;
        alloc[i] = static_cast<size_t>(prod / weights[i].den);
        rem[i] = {prod % weights[i].den, weights[i].den};
        assigned += alloc[i];
    }
    size_t leftover = total > assigned ? total - assigned : 0;
    std::vector<size_t> order(k);
    for (size_t i = 0; i < k; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        // compare rem_a/den_a > rem_b/den_b exactly
        return rem[a].first * rem[b].second > rem[b].first * rem[a].second;
    });
    for (size_t j = 0; j < leftover; ++j) alloc[order[j % k]]++;
    return alloc;
}

namespace {

struct GroupAlloc {
    std::vector<size_t> indices;          // record indices in this group
    std::vector<size_t> per_split;        // allocation across train/eval/test
};

// Rounds the group x split allocation matrix so that both the group totals and
// the globally rounded split sizes are hit exactly.
std::vector<GroupAlloc> allocate_stratified(const std::vector<std::vector<size_t>>& groups,
                                            const std::vector<Fraction>& fractions,
                                            const std::vector<size_t>& split_sizes) {
    const size_t n_groups = groups.size();
    const size_t n_splits = fractions.size();
    std::vector<GroupAlloc> out(n_groups);
    std::vector<size_t> col_left = split_sizes;
    std::vector<size_t> row_left(n_groups, 0);

    struct Cell {
        __int128 rem_num;
        int64_t rem_den;
        size_t g, s;
    };
    std::vector<Cell> cells;

    for (size_t g = 0; g < n_groups; ++g) {
        out[g].indices = groups[g];
        out[g].per_split.assign(n_splits, 0);
        const size_t gsize = groups[g].size();
        size_t floor_sum = 0;
        for (size_t s = 0; s < n_splits; ++s) {
            const __int128 prod = static_cast<__int128>(gsize) * fractions[s].num;
            const size_t fl = static_cast<size_t>(prod / fractions[s].den);
            out[g].per_split[s] = fl;
            floor_sum += fl;
            cells.push_back({prod % fractions[s].den, fractions[s].den, g, s});
        }
        row_left[g] = gsize - floor_sum;
        for (size_t s = 0; s < n_splits; ++s) {
            col_left[s] -= std::min(col_left[s], out[g].per_split[s]);
        }
    }
    // col_left now holds split_sizes minus the floor sums (non-negative since
    // a sum of floors never exceeds the floor of the sum).

    std::stable_sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
        return a.rem_num * b.rem_den > b.rem_num * a.rem_den;
    });
    for (const Cell& c : cells) {
        if (row_left[c.g] > 0 && col_left[c.s] > 0) {
            out[c.g].per_split[c.s]++;
            row_left[c.g]--;
            col_left[c.s]--;
        }
    }
    // Rarely the greedy pass strands a unit; place leftovers anywhere legal.
    for (size_t g = 0; g < n_groups; ++g) {
        while (row_left[g] > 0) {
            for (size_t s = 0; s < n_splits; ++s) {
                if (col_left[s] > 0) {
                    out[g].per_split[s]++;
                    row_left[g]--;
                    col_left[s]--;
                    break;
                }
            }
        }
    }
    return out;
}

}  // namespace

SplitResult split(const RecordSet& rs, const SplitSpec& spec) {
    spec.validate();
    if (rs.records.size() < 3) {
        throw std::invalid_argument("need at least 3 records to split");
    }

    const std::vector<Fraction> fractions = {spec.train, spec.eval, spec.test};
    const std::vector<size_t> split_sizes = largest_remainder(rs.records.size(), fractions);

    std::vector<std::vector<size_t>> groups;
    if (spec.stratify_by_rating) {
        std::map<int, std::vector<size_t>> by_rating;
        for (size_t i = 0; i < rs.records.size(); ++i) {
            by_rating[rs.records[i].rating].push_back(i);
        }
        for (auto& [rating, idx] : by_rating) {
            if (idx.size() < 3) {
                throw std::invalid_argument("rating class " + std::to_string(rating) +
                                            " has fewer records (" +
                                            std::to_string(idx.size()) + ") than splits");
            }
            groups.push_back(std::move(idx));
        }
    } else {
        std::vector<size_t> all(rs.records.size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = i;
        groups.push_back(std::move(all));
    }

    auto allocs = allocate_stratified(groups, fractions, split_sizes);

    std::vector<std::vector<size_t>> picked(3);
    for (size_t g = 0; g < allocs.size(); ++g) {
        std::vector<size_t> idx = allocs[g].indices;
        Rng rng(derive_seed(spec.seed, "split:" + std::to_string(g)));
        rng.shuffle(idx);
        size_t pos = 0;
        for (size_t s = 0; s < 3; ++s) {
            for (size_t j = 0; j < allocs[g].per_split[s]; ++j) {
                picked[s].push_back(idx[pos++]);
            }
        }
    }

    SplitResult result;
    RecordSet* outs[3] = {&result.train, &result.eval, &result.test};
    const char* names[3] = {"train", "eval", "test"};
    for (size_t s = 0; s < 3; ++s) {
        std::sort(picked[s].begin(), picked[s].end());
        outs[s]->provenance = rs.provenance;
        for (size_t i : picked[s]) outs[s]->records.push_back(rs.records[i]);
        outs[s]->provenance.push_back(std::string("split:") + names[s] +
                                      ":seed=" + std::to_string(spec.seed));
    }
    return result;
}

std::string record_to_json_line(const ReviewRecord& r) {
    json obj = json::object();
    for (auto it = r.extras.begin(); it != r.extras.end(); ++it) obj[it.key()] = it.value();
    obj["id"] = r.id;
    obj["text"] = r.text;
    obj["rating"] = r.rating;
    obj["source"] = r.source;
    if (!r.lang.empty()) obj["lang"] = r.lang;
    obj["word_count"] = r.word_count;
    return obj.dump();
}

void write_jsonl(const RecordSet& rs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& r : rs.records) {
        out << record_to_json_line(r) << "\n";
    }
}

}  // namespace starsent::corpus
