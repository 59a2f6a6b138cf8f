#pragma once
#include <string>
#include <string_view>
#include <vector>

namespace kgcot {

/// Strip leading/trailing ASCII whitespace.
std::string trim(std::string_view s);

/// Lowercase ASCII letters; other bytes pass through untouched.
std::string lower_ascii(std::string_view s);

/// Canonical name folding used for exact-match lookups: ASCII case fold,
/// trim, and collapse of internal whitespace runs to a single space.
/// Non-ASCII UTF-8 bytes are preserved as-is.
std::string fold_name(std::string_view s);

/// Split on a single-character delimiter; no trimming, keeps empty pieces.
std::vector<std::string> split(std::string_view s, char delim);

/// True when `needle` occurs in `haystack`.
bool contains(std::string_view haystack, std::string_view needle);

} // namespace kgcot
