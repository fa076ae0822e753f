#include "starsent/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <stdexcept>

namespace starsent::text {

std::vector<char32_t> decode_utf8(std::string_view s) {
    std::vector<char32_t> out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        const unsigned char b0 = static_cast<unsigned char>(s[i]);
        char32_t cp = 0xFFFD;
        size_t len = 1;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0 && i + 1 < s.size()) {
            const unsigned char b1 = static_cast<unsigned char>(s[i + 1]);
            if ((b1 & 0xC0) == 0x80) {
                cp = (static_cast<char32_t>(b0 & 0x1F) << 6) | (b1 & 0x3F);
                len = 2;
                if (cp < 0x80) cp = 0xFFFD;
            }
        } else if ((b0 & 0xF0) == 0xE0 && i + 2 < s.size()) {
            const unsigned char b1 = static_cast<unsigned char>(s[i + 1]);
            const unsigned char b2 = static_cast<unsigned char>(s[i + 2]);
            if ((b1 & 0xC0) == 0x80 && (b2 & 0xC0) == 0x80) {
                cp = (static_cast<char32_t>(b0 & 0x0F) << 12) |
                     (static_cast<char32_t>(b1 & 0x3F) << 6) | (b2 & 0x3F);
                len = 3;
                if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) cp = 0xFFFD;
            }
        } else if ((b0 & 0xF8) == 0xF0 && i + 3 < s.size()) {
            const unsigned char b1 = static_cast<unsigned char>(s[i + 1]);
            const unsigned char b2 = static_cast<unsigned char>(s[i + 2]);
            const unsigned char b3 = static_cast<unsigned char>(s[i + 3]);
            if ((b1 & 0xC0) == 0x80 && (b2 & 0xC0) == 0x80 && (b3 & 0xC0) == 0x80) {
                cp = (static_cast<char32_t>(b0 & 0x07) << 18) |
                     (static_cast<char32_t>(b1 & 0x3F) << 12) |
                     (static_cast<char32_t>(b2 & 0x3F) << 6) | (b3 & 0x3F);
                len = 4;
                if (cp < 0x10000 || cp > 0x10FFFF) cp = 0xFFFD;
            }
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode_utf8(char32_t cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

std::string encode_utf8(const std::vector<char32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) out += encode_utf8(cp);
    return out;
}

bool is_valid_utf8(std::string_view s) {
    size_t i = 0;
    while (i < s.size()) {
        const unsigned char b0 = static_cast<unsigned char>(s[i]);
        size_t len;
        char32_t cp;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            return false;
        }
        if (i + len > s.size()) return false;
        for (size_t k = 1; k < len; ++k) {
            const unsigned char b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (b & 0x3F);
        }
        static const char32_t min_cp[5] = {0, 0, 0x80, 0x800, 0x10000};
        if (cp < min_cp[len] || cp > 0x10FFFF) return false;
        if (cp >= 0xD800 && cp <= 0xDFFF) return false;
        i += len;
    }
    return true;
}

bool is_letter(char32_t cp) { return u_isalpha(static_cast<UChar32>(cp)) != 0; }

bool is_symbol_or_emoji(char32_t cp) {
    const int8_t t = u_charType(static_cast<UChar32>(cp));
    return t == U_MATH_SYMBOL || t == U_CURRENCY_SYMBOL || t == U_MODIFIER_SYMBOL ||
           t == U_OTHER_SYMBOL;
}

bool is_space(char32_t cp) {
    return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0;
}

std::string fold_nfc(std::string_view s) {
    UErrorCode ec = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(ec);
    if (U_FAILURE(ec)) throw std::runtime_error("ICU NFC instance unavailable");
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(
        icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    icu::UnicodeString n = nfc->normalize(u, ec);
    if (U_FAILURE(ec)) throw std::runtime_error("NFC normalization failed");
    n.foldCase();
    std::string out;
    n.toUTF8String(out);
    return out;
}

std::string squeeze_whitespace(std::string_view s) {
    const std::vector<char32_t> cps = decode_utf8(s);
    std::string out;
    bool pending_space = false;
    bool seen_content = false;
    for (char32_t cp : cps) {
        if (is_space(cp)) {
            pending_space = seen_content;
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += encode_utf8(cp);
        seen_content = true;
    }
    return out;
}

std::string trim(std::string_view s) {
    const std::vector<char32_t> cps = decode_utf8(s);
    size_t a = 0;
    size_t b = cps.size();
    while (a < b && is_space(cps[a])) ++a;
    while (b > a && is_space(cps[b - 1])) --b;
    std::string out;
    for (size_t i = a; i < b; ++i) out += encode_utf8(cps[i]);
    return out;
}

size_t word_count(std::string_view s) {
    size_t n = 0;
    bool in_word = false;
    for (char32_t cp : decode_utf8(s)) {
        if (is_space(cp)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> words;
    std::string cur;
    for (char32_t cp : decode_utf8(s)) {
        if (is_space(cp)) {
            if (!cur.empty()) {
                words.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur += encode_utf8(cp);
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

}  // namespace starsent::text
