#pragma once
#include <string>
#include <string_view>

namespace kgcot {

/// SHA-256 of the input, as lowercase hex.
std::string sha256_hex(std::string_view data);

} // namespace kgcot
