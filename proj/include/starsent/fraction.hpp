#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>

namespace starsent {

// Exact rational with a small denominator; enough for split fractions and
// class-distribution targets, where floating point would break the
// "fractions sum to 1 exactly" contract.
struct Fraction {
    int64_t num = 0;
    int64_t den = 1;

    Fraction() = default;
    Fraction(int64_t n, int64_t d) : num(n), den(d) {
        if (d == 0) throw std::invalid_argument("fraction with zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        reduce();
    }

    void reduce() {
        const int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    Fraction operator+(const Fraction& o) const {
        return Fraction(num * o.den + o.num * den, den * o.den);
    }
    bool operator==(const Fraction& o) const { return num == o.num && den == o.den; }

    // Parses "0.68", "1", "17/25".
    static Fraction parse(std::string_view s);
};

inline Fraction Fraction::parse(std::string_view s) {
    if (s.empty()) throw std::invalid_argument("empty fraction");
    const size_t slash = s.find('/');
    if (slash != std::string_view::npos) {
        const int64_t n = std::stoll(std::string(s.substr(0, slash)));
        const int64_t d = std::stoll(std::string(s.substr(slash + 1)));
        return Fraction(n, d);
    }
    const size_t dot = s.find('.');
    if (dot == std::string_view::npos) {
        return Fraction(std::stoll(std::string(s)), 1);
    }
    const std::string whole(s.substr(0, dot));
    const std::string frac(s.substr(dot + 1));
    if (frac.size() > 15) throw std::invalid_argument("fraction has too many digits: " + std::string(s));
    int64_t den = 1;
    for (size_t i = 0; i < frac.size(); ++i) den *= 10;
    const int64_t w = whole.empty() ? 0 : std::stoll(whole);
    const int64_t f = frac.empty() ? 0 : std::stoll(frac);
    const bool neg = !whole.empty() && whole[0] == '-';
    int64_t n = w * den + (neg ? -f : f);
    return Fraction(n, den);
}

}  // namespace starsent
