#pragma once

// Content-addressed object store. Objects live under
//   <root>/objects/<aa>/<bb>/<64-hex-digest>
// and are written once via temp file + hard link, so concurrent stores of
// the same content converge on a single file. Creation times go to a
// line-delimited sidecar <root>/index.log ("<address> <rfc3339>"), never into
// the hashed payload. There is no delete or overwrite operation.

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "market/hash.hpp"
#include "market/time.hpp"

namespace market {

class ContentAddress {
 public:
  ContentAddress() = default;
  explicit ContentAddress(const Digest& digest) : hex_(to_hex(digest)) {}

  /// Validates 64 lowercase hex chars; throws ValidationError otherwise.
  static ContentAddress parse(std::string_view hex);
  static ContentAddress of(std::string_view bytes) {
    return ContentAddress(sha256(bytes));
  }

  const std::string& hex() const noexcept { return hex_; }
  bool empty() const noexcept { return hex_.empty(); }

  friend auto operator<=>(const ContentAddress&, const ContentAddress&) = default;

 private:
  std::string hex_;
};

struct StoredObject {
  ContentAddress address;
  std::string bytes;
  Timestamp created_at;
};

class ContentStore {
 public:
  ContentStore(std::filesystem::path root, Clock& clock, bool fsync = true);

  /// Idempotent: storing bytes that are already present returns the same
  /// address without touching the object or the index.
  ContentAddress store(std::string_view bytes);

  /// Self-verifying read. Throws NotFound or IntegrityFailure.
  std::string retrieve(const ContentAddress& address) const;
  StoredObject retrieve_object(const ContentAddress& address) const;

  bool contains(const ContentAddress& address) const;
  /// Every address recorded in the sidecar index, in insertion order.
  std::vector<ContentAddress> addresses() const;
  std::size_t size() const;

  std::filesystem::path object_path(const ContentAddress& address) const;
  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::optional<Timestamp> created_at(const ContentAddress& address) const;

  std::filesystem::path root_;
  Clock& clock_;
  bool fsync_;
  mutable std::mutex index_mutex_;
};

}  // namespace market
