#pragma once

// Small POSIX helpers shared by the persistent stores.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace market::detail {

/// Creates `path` (must not exist) with `bytes`, optionally fsync'ing.
void write_new_file(const std::filesystem::path& path, std::string_view bytes,
                    bool fsync);

/// Appends `bytes` to `path` (creating it) with a single write(2) call.
void append_file(const std::filesystem::path& path, std::string_view bytes,
                 bool fsync);

void fsync_dir(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);

void truncate_file(const std::filesystem::path& path, std::uintmax_t size);

}  // namespace market::detail
