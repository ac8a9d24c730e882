#include "market/cas.hpp"

#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fileio.hpp"
#include "market/error.hpp"

namespace fs = std::filesystem;

namespace market {

ContentAddress ContentAddress::parse(std::string_view hex) {
  Digest d{};
  if (!from_hex(hex, d)) {
    throw Error(ErrorCode::ValidationError,
                "not a content address: '" + std::string(hex) + "'");
  }
  return ContentAddress(d);
}

ContentStore::ContentStore(fs::path root, Clock& clock, bool fsync)
    : root_(std::move(root)), clock_(clock), fsync_(fsync) {
  std::error_code ec;
  fs::create_directories(root_ / "objects", ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "cannot create object directory under '" + root_.string() +
                    "': " + ec.message());
  }
}

fs::path ContentStore::object_path(const ContentAddress& address) const {
  const auto& h = address.hex();
  return root_ / "objects" / h.substr(0, 2) / h.substr(2, 2) / h;
}

ContentAddress ContentStore::store(std::string_view bytes) {
  if (bytes.empty()) {
    throw Error(ErrorCode::EmptyContent, "refusing to store empty content");
  }
  const auto address = ContentAddress::of(bytes);
  const auto path = object_path(address);
  if (fs::exists(path)) return address;

  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) {
    throw Error(ErrorCode::IoError, "mkdir '" + path.parent_path().string() +
                                        "': " + ec.message());
  }

  static std::atomic<unsigned long> tmp_counter{0};
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(tmp_counter.fetch_add(1));
  detail::write_new_file(tmp, bytes, fsync_);

  // link(2) fails with EEXIST if another writer won the race; either way
  // exactly one object file ends up at `path`.
  const bool created = ::link(tmp.c_str(), path.c_str()) == 0;
  const int link_errno = errno;
  ::unlink(tmp.c_str());
  if (!created && link_errno != EEXIST) {
    throw Error(ErrorCode::IoError,
                "link '" + path.string() + "': " + std::strerror(link_errno));
  }
  if (created) {
    if (fsync_) detail::fsync_dir(path.parent_path());
    const std::string line =
        address.hex() + " " + clock_.now().rfc3339() + "\n";
    std::lock_guard lock(index_mutex_);
    detail::append_file(root_ / "index.log", line, fsync_);
  }
  return address;
}

std::string ContentStore::retrieve(const ContentAddress& address) const {
  const auto path = object_path(address);
  if (address.empty() || !fs::exists(path)) {
    throw Error(ErrorCode::NotFound, "no object at address " + address.hex());
  }
  auto bytes = detail::read_file(path);
  if (ContentAddress::of(bytes) != address) {
    throw Error(ErrorCode::IntegrityFailure,
                "stored object no longer hashes to " + address.hex());
  }
  return bytes;
}

StoredObject ContentStore::retrieve_object(const ContentAddress& address) const {
  StoredObject obj{address, retrieve(address), {}};
  if (auto ts = created_at(address)) obj.created_at = *ts;
  return obj;
}

bool ContentStore::contains(const ContentAddress& address) const {
  return !address.empty() && fs::exists(object_path(address));
}

std::vector<ContentAddress> ContentStore::addresses() const {
  std::vector<ContentAddress> out;
  std::lock_guard lock(index_mutex_);
  std::ifstream in(root_ / "index.log");
  std::string hex, ts;
  while (in >> hex >> ts) {
    Digest d{};
    if (from_hex(hex, d)) out.emplace_back(d);
  }
  return out;
}

std::size_t ContentStore::size() const { return addresses().size(); }

std::optional<Timestamp> ContentStore::created_at(
    const ContentAddress& address) const {
  std::lock_guard lock(index_mutex_);
  std::ifstream in(root_ / "index.log");
  std::string hex, ts;
  while (in >> hex >> ts) {
    if (hex == address.hex()) return Timestamp::parse(ts);
  }
  return std::nullopt;
}

}  // namespace market
