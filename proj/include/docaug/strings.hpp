#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace docaug::strings {

std::string ascii_lower(std::string_view s);

std::string trim(std::string_view s);

// Lowercased maximal alphanumeric runs.
std::vector<std::string> alnum_tokens(std::string_view s);

// FNV-1a 64-bit, used for cache keys and seed mixing.
std::uint64_t fnv1a64(std::string_view s);

std::string hex64(std::uint64_t v);

bool iequals(std::string_view a, std::string_view b);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace docaug::strings
