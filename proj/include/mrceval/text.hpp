#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/sha.h>

namespace mrceval::text {

// Decodes one UTF-8 code point starting at `i`; advances `i` past it.
// Malformed bytes are passed through as single-byte code points.
inline uint32_t decode_utf8(std::string_view s, size_t& i) {
    unsigned char c = static_cast<unsigned char>(s[i]);
    size_t len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    if (c < 0xC0 || i + len > s.size()) { ++i; return c; }
    uint32_t cp = c & (0x7F >> len);
    for (size_t k = 1; k < len; ++k)
        cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    i += len;
    return cp;
}

inline bool is_space_cp(uint32_t cp) {
    switch (cp) {
        case u' ': case u'\t': case u'\n': case u'\r': case u'\f': case u'\v':
        case 0x0085: case 0x00A0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

// Splits on runs of Unicode whitespace.
inline std::vector<std::string_view> words(std::string_view s) {
    std::vector<std::string_view> out;
    size_t i = 0, start = 0;
    bool in_word = false;
    while (i < s.size()) {
        size_t at = i;
        bool sp = is_space_cp(decode_utf8(s, i));
        if (sp && in_word) {
            out.push_back(s.substr(start, at - start));
            in_word = false;
        } else if (!sp && !in_word) {
            start = at;
            in_word = true;
        }
    }
    if (in_word) out.push_back(s.substr(start));
    return out;
}

inline size_t word_count(std::string_view s) { return words(s).size(); }

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Trims and collapses internal whitespace runs to single spaces.
inline std::string collapse_ws(std::string_view s) {
    std::string out;
    for (auto w : words(s)) {
        if (!out.empty()) out.push_back(' ');
        out.append(w);
    }
    return out;
}

inline std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Whitespace-insensitive substring test (both sides collapsed).
inline bool contains_normalized(std::string_view haystack, std::string_view needle) {
    std::string h = collapse_ws(haystack);
    std::string n = collapse_ws(needle);
    if (n.empty()) return false;
    return h.find(n) != std::string::npos;
}

inline std::vector<std::string_view> split_lines(std::string_view s) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (start <= s.size()) {
        size_t nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char b : digest) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0xF]);
    }
    return out;
}

}  // namespace mrceval::text
