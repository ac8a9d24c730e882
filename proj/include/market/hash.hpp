#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace market {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::byte> data);
Digest sha256(std::string_view data);

std::string to_hex(const Digest& digest);
/// Parses 64 lowercase hex characters; returns false on any other input.
bool from_hex(std::string_view hex, Digest& out);

inline std::span<const std::byte> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::byte*>(s.data()), s.size()};
}

}  // namespace market
