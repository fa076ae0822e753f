#include "starsent/tokenizer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "starsent/text.hpp"

namespace starsent::tokenizer {

const char* to_string(Scheme s) {
    switch (s) {
        case Scheme::wordpiece: return "wordpiece";
        case Scheme::byte: return "byte";
        case Scheme::unigram: return "unigram";
    }
    return "?";
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "wordpiece") return Scheme::wordpiece;
    if (s == "byte") return Scheme::byte;
    if (s == "unigram") return Scheme::unigram;
    throw std::invalid_argument("unknown tokenizer scheme: " + s);
}

// ---------------------------------------------------------------------------
// WordPiece
// ---------------------------------------------------------------------------

namespace {
const std::vector<std::string>& wordpiece_specials() {
    static const std::vector<std::string> specials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
    return specials;
}
}  // namespace

WordPieceVocab WordPieceVocab::from_tokens(const std::vector<std::string>& ordered) {
    WordPieceVocab v;
    int id = 0;
    for (const auto& s : wordpiece_specials()) v.tokens[s] = id++;
    for (const auto& t : ordered) {
        if (v.tokens.count(t)) continue;
        v.tokens[t] = id++;
    }
    return v;
}

int WordPieceVocab::id_of(const std::string& token) const {
    auto it = tokens.find(token);
    if (it == tokens.end()) throw std::invalid_argument("token not in vocab: " + token);
    return it->second;
}

std::vector<std::string> WordPieceVocab::by_id() const {
    std::vector<std::string> out(tokens.size());
    for (const auto& [tok, id] : tokens) out[static_cast<size_t>(id)] = tok;
    return out;
}

void WordPieceVocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& tok : by_id()) out << tok << "\n";
}

WordPieceVocab WordPieceVocab::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    WordPieceVocab v;
    std::string line;
    int id = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        v.tokens[line] = id++;
    }
    const auto& specials = wordpiece_specials();
    for (size_t i = 0; i < specials.size(); ++i) {
        auto it = v.tokens.find(specials[i]);
        if (it == v.tokens.end() || it->second != static_cast<int>(i)) {
            throw std::runtime_error(path + ": special token " + specials[i] +
                                     " missing or not at id " + std::to_string(i));
        }
    }
    return v;
}

TokenSequence wordpiece_encode(const std::string& input, const WordPieceVocab& vocab,
                               bool add_specials) {
    TokenSequence seq;
    seq.scheme = Scheme::wordpiece;
    seq.n = text::decode_utf8(input).size();

    auto push = [&](const std::string& piece) {
        seq.pieces.push_back(piece);
        seq.ids.push_back(vocab.id_of(piece));
    };

    if (add_specials) push("[CLS]");
    for (const std::string& word : text::split_words(input)) {
        const std::vector<char32_t> cps = text::decode_utf8(word);
        if (cps.size() > WordPieceVocab::kMaxWordChars) {
            push("[UNK]");
            continue;
        }
        std::vector<std::string> word_pieces;
        size_t start = 0;
        bool bad = false;
        while (start < cps.size()) {
            size_t end = cps.size();
            std::string found;
            while (end > start) {
                std::string candidate = start > 0 ? WordPieceVocab::kContinuation : "";
                for (size_t i = start; i < end; ++i) candidate += text::encode_utf8(cps[i]);
                if (vocab.contains(candidate)) {
                    found = candidate;
                    break;
                }
                --end;
            }
            if (found.empty()) {
                bad = true;
                break;
            }
            word_pieces.push_back(found);
            start = end;
        }
        if (bad) {
            push("[UNK]");
        } else {
            for (const auto& p : word_pieces) push(p);
        }
    }
    if (add_specials) push("[SEP]");
    return seq;
}

WordPieceVocab wordpiece_train(const std::vector<std::string>& corpus, size_t vocab_size) {
    // Word corpus as unit sequences; the first unit of a word is plain, the
    // rest carry the continuation prefix.
    struct Word {
        std::vector<std::string> units;
        int64_t count = 0;
    };
    std::map<std::string, int64_t> word_counts;
    for (const auto& line : corpus) {
        for (const auto& w : text::split_words(line)) word_counts[w]++;
    }
    std::vector<Word> words;
    std::vector<std::string> alphabet;
    {
        // every character enters the alphabet in plain form, plus the
        // continuation form wherever it occurs word-internally
        std::unordered_map<std::string, bool> seen_unit;
        auto register_unit = [&](const std::string& unit) {
            if (!seen_unit[unit]) {
                seen_unit[unit] = true;
                alphabet.push_back(unit);
            }
        };
        for (const auto& [w, count] : word_counts) {
            Word word;
            word.count = count;
            const auto cps = text::decode_utf8(w);
            for (size_t i = 0; i < cps.size(); ++i) {
                const std::string ch = text::encode_utf8(cps[i]);
                register_unit(ch);
                std::string unit = i > 0 ? WordPieceVocab::kContinuation + ch : ch;
                if (i > 0) register_unit(unit);
                word.units.push_back(std::move(unit));
            }
            words.push_back(std::move(word));
        }
    }
    std::sort(alphabet.begin(), alphabet.end());

    const size_t base_size = wordpiece_specials().size() + alphabet.size();
    if (vocab_size < base_size) {
        throw std::invalid_argument("vocab_size " + std::to_string(vocab_size) +
                                    " below minimum " + std::to_string(base_size) +
                                    " (alphabet + specials)");
    }

    std::vector<std::string> ordered = alphabet;
    std::unordered_map<std::string, bool> in_vocab;
    for (const auto& u : ordered) in_vocab[u] = true;

    while (wordpiece_specials().size() + ordered.size() < vocab_size) {
        // Recount units and adjacent pairs.
        std::unordered_map<std::string, int64_t> unit_counts;
        std::map<std::pair<std::string, std::string>, int64_t> pair_counts;
        for (const auto& word : words) {
            for (size_t i = 0; i < word.units.size(); ++i) {
                unit_counts[word.units[i]] += word.count;
                if (i + 1 < word.units.size()) {
                    pair_counts[{word.units[i], word.units[i + 1]}] += word.count;
                }
            }
        }
        if (pair_counts.empty()) break;

        // argmax of count(ab) / (count(a) * count(b)); exact rational compare,
        // lexicographic tie-break (map iteration order: the first max wins).
        std::pair<std::string, std::string> best;
        __int128 best_num = -1;
        __int128 best_den = 1;
        for (const auto& [pair, c] : pair_counts) {
            const __int128 num = c;
            const __int128 den = static_cast<__int128>(unit_counts[pair.first]) *
                                 unit_counts[pair.second];
            if (best_num < 0 || num * best_den > best_num * den) {
                best = pair;
                best_num = num;
                best_den = den;
            }
        }

        std::string merged = best.first;
        std::string right = best.second;
        if (right.rfind(WordPieceVocab::kContinuation, 0) == 0) {
            right = right.substr(std::string(WordPieceVocab::kContinuation).size());
        }
        merged += right;

        for (auto& word : words) {
            std::vector<std::string> next;
            next.reserve(word.units.size());
            size_t i = 0;
            while (i < word.units.size()) {
                if (i + 1 < word.units.size() && word.units[i] == best.first &&
                    word.units[i + 1] == best.second) {
                    next.push_back(merged);
                    i += 2;
                } else {
                    next.push_back(word.units[i]);
                    ++i;
                }
            }
            word.units = std::move(next);
        }

        if (!in_vocab[merged]) {
            in_vocab[merged] = true;
            ordered.push_back(merged);
        }
        // Distinct pairs can merge to an existing token string; the loop then
        // continues without growing the vocabulary.
    }

    return WordPieceVocab::from_tokens(ordered);
}

// ---------------------------------------------------------------------------
// Byte-level
// ---------------------------------------------------------------------------

TokenSequence byte_encode(const std::string& input) {
    if (!text::is_valid_utf8(input)) {
        throw std::invalid_argument("byte_encode input is not valid UTF-8");
    }
    TokenSequence seq;
    seq.scheme = Scheme::byte;
    seq.n = input.size();
    seq.ids.reserve(input.size());
    seq.pieces.reserve(input.size());
    for (unsigned char b : input) {
        seq.ids.push_back(static_cast<int>(b) + bytes::kOffset);
        seq.pieces.push_back(std::string(1, static_cast<char>(b)));
    }
    return seq;
}

std::string byte_decode(const std::vector<int>& ids) {
    std::string out;
    out.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id >= bytes::kVocabSize) {
            throw std::invalid_argument("byte token id out of range: " + std::to_string(id));
        }
        if (id < bytes::kOffset) continue;  // PAD/EOS/UNK carry no bytes
        out.push_back(static_cast<char>(id - bytes::kOffset));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Unigram LM
// ---------------------------------------------------------------------------

void UnigramVocab::add(const std::string& piece, double log_prob) {
    if (piece.empty()) throw std::invalid_argument("empty unigram piece");
    if (!std::isfinite(log_prob) || log_prob > 0.0) {
        throw std::invalid_argument("piece '" + piece +
                                    "' log-probability must be finite and <= 0");
    }
    if (piece_ids.count(piece)) throw std::invalid_argument("duplicate piece: " + piece);
    piece_ids[piece] = pieces_by_id.size();
    pieces_by_id.push_back(piece);
    log_probs.push_back(log_prob);
}

void UnigramVocab::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    for (size_t i = 0; i < pieces_by_id.size(); ++i) {
        out << pieces_by_id[i] << "\t" << log_probs[i] << "\n";
    }
}

UnigramVocab UnigramVocab::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    UnigramVocab v;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": expected piece<TAB>logprob");
        }
        v.add(line.substr(0, tab), std::stod(line.substr(tab + 1)));
    }
    return v;
}

namespace {

// Lossless whitespace escaping: every space becomes the meta symbol.
std::string escape_spaces(const std::string& input, const std::string& meta) {
    if (input.find(meta) != std::string::npos) {
        throw std::invalid_argument("input contains the meta symbol " + meta);
    }
    std::string out;
    out.reserve(input.size());
    for (char c : input) {
        if (c == ' ') {
            out += meta;
        } else {
            out += c;
        }
    }
    return out;
}

}  // namespace

TokenSequence unigram_encode(const std::string& input, const UnigramVocab& vocab) {
    const std::string escaped = escape_spaces(input, vocab.meta_symbol);
    const std::vector<char32_t> cps = text::decode_utf8(escaped);

    // Full character coverage is a precondition; check it up front so the
    // failing character can be named.
    for (char32_t cp : cps) {
        if (!vocab.contains(text::encode_utf8(cp))) {
            throw std::invalid_argument("character '" + text::encode_utf8(cp) +
                                        "' not covered by the unigram vocabulary");
        }
    }

    const size_t len = cps.size();
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    std::vector<double> best(len + 1, kNegInf);
    std::vector<size_t> back(len + 1, 0);   // start index of the best piece ending here
    std::vector<size_t> back_id(len + 1, 0);
    best[0] = 0.0;

    // Precompute byte offsets of each code point in `escaped`.
    std::vector<size_t> offsets;
    offsets.reserve(len + 1);
    {
        size_t off = 0;
        for (char32_t cp : cps) {
            offsets.push_back(off);
            off += text::encode_utf8(cp).size();
        }
        offsets.push_back(escaped.size());
    }

    for (size_t end = 1; end <= len; ++end) {
        const size_t lo = end > vocab.max_piece_chars ? end - vocab.max_piece_chars : 0;
        for (size_t start = end; start-- > lo;) {
            if (best[start] == kNegInf) continue;
            const std::string piece =
                escaped.substr(offsets[start], offsets[end] - offsets[start]);
            auto it = vocab.piece_ids.find(piece);
            if (it == vocab.piece_ids.end()) continue;
            const double score = best[start] + vocab.log_probs[it->second];
            if (score > best[end]) {
                best[end] = score;
                back[end] = start;
                back_id[end] = it->second;
            }
        }
    }

    TokenSequence seq;
    seq.scheme = Scheme::unigram;
    seq.n = len;
    size_t pos = len;
    while (pos > 0) {
        seq.ids.push_back(static_cast<int>(back_id[pos]));
        seq.pieces.push_back(vocab.pieces_by_id[back_id[pos]]);
        pos = back[pos];
    }
    std::reverse(seq.ids.begin(), seq.ids.end());
    std::reverse(seq.pieces.begin(), seq.pieces.end());
    return seq;
}

std::string unigram_decode(const TokenSequence& seq, const UnigramVocab& vocab) {
    std::string joined;
    for (const auto& p : seq.pieces) joined += p;
    std::string out;
    size_t i = 0;
    const std::string& meta = vocab.meta_symbol;
    while (i < joined.size()) {
        if (joined.compare(i, meta.size(), meta) == 0) {
            out += ' ';
            i += meta.size();
        } else {
            out += joined[i];
            ++i;
        }
    }
    return out;
}

double unigram_score(const TokenSequence& seq, const UnigramVocab& vocab) {
    double total = 0.0;
    for (int id : seq.ids) total += vocab.log_probs[static_cast<size_t>(id)];
    return total;
}

}  // namespace starsent::tokenizer
