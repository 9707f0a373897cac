#pragma once

#include <string>
#include <string_view>

namespace orthoai {

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// First `chars` hex digits of the SHA-256; used as a short content digest.
std::string short_digest(std::string_view bytes, std::size_t chars = 16);

}  // namespace orthoai
