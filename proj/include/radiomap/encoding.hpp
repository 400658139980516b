#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace radiomap {

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// Throws MalformedInput on characters outside the standard alphabet or bad padding.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Lowercase hex SHA-256 of a file's contents; empty string if unreadable.
std::string sha256_file(const std::string& path);

}  // namespace radiomap
