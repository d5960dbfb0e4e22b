#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace goldsift {

// A token located inside the text it was cut from. `begin` is a byte offset;
// `end` is one past the last byte.
struct Token {
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;
};

// Whitespace tokenization: a token is a maximal run of non-whitespace bytes.
// This is the token model the local backends (table, hash-mock) share; it is
// deliberately simple so tests can re-derive every offset by hand.
inline std::vector<Token> whitespace_tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= n) break;
        std::size_t start = i;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        tokens.push_back(Token{std::string(text.substr(start, i - start)), start, i});
    }
    return tokens;
}

inline std::size_t whitespace_token_count(std::string_view text) {
    std::size_t count = 0;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= n) break;
        ++count;
        while (i < n && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    }
    return count;
}

inline std::string trim(std::string_view text) {
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

}  // namespace goldsift
