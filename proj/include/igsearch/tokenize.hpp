#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace igsearch {

using Token = std::string;
using Tokens = std::vector<Token>;

// Unicode NFC normalization of UTF-8 text. ASCII input is returned unchanged.
std::string nfc(std::string_view text);

// NFC-normalize, then split on ASCII whitespace.
Tokens tokenize(std::string_view text);

std::string join(const Tokens& tokens, std::string_view sep = " ");

inline bool is_space(char c) noexcept {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace igsearch
