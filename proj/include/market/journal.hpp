#pragma once

#include <filesystem>
#include <mutex>
#include <vector>

#include "market/canonical_json.hpp"

namespace market {

/// Line-delimited canonical JSON event log. Each append is one write(2)
/// of a complete line; a torn final line is dropped on read.
class Journal {
 public:
  Journal(std::filesystem::path path, bool fsync);

  void append(const canonical::Json& event);
  /// Reads every complete event, truncating a torn tail in place.
  std::vector<canonical::Json> replay();

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  bool fsync_;
  std::mutex mutex_;
};

}  // namespace market
