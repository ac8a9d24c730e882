#include "market/journal.hpp"

#include <string_view>

#include "fileio.hpp"
#include "market/error.hpp"

namespace fs = std::filesystem;

namespace market {

Journal::Journal(fs::path path, bool fsync) : path_(std::move(path)), fsync_(fsync) {
  std::error_code ec;
  fs::create_directories(path_.parent_path(), ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "cannot create journal directory '" + path_.parent_path().string() + "'");
  }
}

void Journal::append(const canonical::Json& event) {
  std::lock_guard lock(mutex_);
  detail::append_file(path_, canonical::dump(event) + "\n", fsync_);
}

std::vector<canonical::Json> Journal::replay() {
  std::lock_guard lock(mutex_);
  std::vector<canonical::Json> events;
  if (!fs::exists(path_)) return events;
  const auto text = detail::read_file(path_);
  std::size_t pos = 0;
  while (true) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;
    events.push_back(canonical::parse(std::string_view(text).substr(pos, nl - pos)));
    pos = nl + 1;
  }
  if (pos != text.size()) detail::truncate_file(path_, pos);
  return events;
}

}  // namespace market
