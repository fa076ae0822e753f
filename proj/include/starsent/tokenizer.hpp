#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace starsent::tokenizer {

enum class Scheme { wordpiece, byte, unigram };

const char* to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

struct TokenSequence {
    std::vector<int> ids;
    std::vector<std::string> pieces;
    Scheme scheme = Scheme::byte;
    size_t n = 0;  // source length: characters (wordpiece/unigram) or bytes (byte)
};

// ---------------------------------------------------------------------------
// WordPiece
// ---------------------------------------------------------------------------

struct WordPieceVocab {
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kCls = 2;
    static constexpr int kSep = 3;
    static constexpr const char* kContinuation = "##";
    // A word longer than this many characters maps straight to UNK.
    static constexpr size_t kMaxWordChars = 100;

    std::unordered_map<std::string, int> tokens;  // includes the four specials

    static WordPieceVocab from_tokens(const std::vector<std::string>& merge_order);
    int id_of(const std::string& token) const;
    bool contains(const std::string& token) const { return tokens.count(token) > 0; }
    std::vector<std::string> by_id() const;

    // One token per line, line number = id, specials first.
    void save(const std::string& path) const;
    static WordPieceVocab load(const std::string& path);
};

TokenSequence wordpiece_encode(const std::string& input, const WordPieceVocab& vocab,
                               bool add_specials);

WordPieceVocab wordpiece_train(const std::vector<std::string>& corpus, size_t vocab_size);

// ---------------------------------------------------------------------------
// Byte-level (lossless)
// ---------------------------------------------------------------------------

namespace bytes {
constexpr int kPad = 0;
constexpr int kEos = 1;
constexpr int kUnk = 2;
constexpr int kOffset = 3;
constexpr int kVocabSize = 259;  // 256 byte values + 3 specials
}  // namespace bytes

TokenSequence byte_encode(const std::string& input);
std::string byte_decode(const std::vector<int>& ids);

// ---------------------------------------------------------------------------
// Unigram LM (Viterbi)
// ---------------------------------------------------------------------------

struct UnigramVocab {
    std::string meta_symbol = "\xe2\x96\x81";  // U+2581 LOWER ONE EIGHTH BLOCK
    size_t max_piece_chars = 16;
    // insertion order defines ids
    std::vector<std::string> pieces_by_id;
    std::unordered_map<std::string, size_t> piece_ids;
    std::vector<double> log_probs;

    void add(const std::string& piece, double log_prob);
    bool contains(const std::string& piece) const { return piece_ids.count(piece) > 0; }

    // TSV, one `piece<TAB>logprob` per line.
    void save(const std::string& path) const;
    static UnigramVocab load(const std::string& path);
};

TokenSequence unigram_encode(const std::string& input, const UnigramVocab& vocab);
std::string unigram_decode(const TokenSequence& seq, const UnigramVocab& vocab);

// Total Viterbi log score of a sequence (sum of piece log probabilities).
double unigram_score(const TokenSequence& seq, const UnigramVocab& vocab);

}  // namespace starsent::tokenizer
