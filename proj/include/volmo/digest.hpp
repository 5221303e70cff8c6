#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace volmo {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

std::string sha256_file_hex(const std::string& path);

/// 64-bit FNV-1a. Used where a short, stable, non-cryptographic key is enough.
std::uint64_t fnv1a64(std::string_view data) noexcept;

}  // namespace volmo
