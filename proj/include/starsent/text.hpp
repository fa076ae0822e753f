#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace starsent::text {

// UTF-8 <-> code point helpers. Invalid byte sequences decode to U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view s);
std::string encode_utf8(const std::vector<char32_t>& cps);
std::string encode_utf8(char32_t cp);
bool is_valid_utf8(std::string_view s);

bool is_letter(char32_t cp);
bool is_symbol_or_emoji(char32_t cp);
bool is_space(char32_t cp);

// NFC normalization followed by Unicode case folding.
std::string fold_nfc(std::string_view s);

// Collapse runs of whitespace to single spaces and trim the ends.
std::string squeeze_whitespace(std::string_view s);

std::string trim(std::string_view s);

// Whitespace-delimited token count.
size_t word_count(std::string_view s);

std::vector<std::string> split_words(std::string_view s);

}  // namespace starsent::text
