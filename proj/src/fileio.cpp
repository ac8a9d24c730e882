#include "fileio.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "market/error.hpp"

namespace market::detail {

namespace {

[[noreturn]] void io_fail(const std::string& what, const std::filesystem::path& p) {
  throw Error(ErrorCode::IoError,
              what + " '" + p.string() + "': " + std::strerror(errno));
}

void write_all(int fd, std::string_view bytes, const std::filesystem::path& p) {
  const char* data = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, data, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_fail("write", p);
    }
    data += n;
    left -= static_cast<std::size_t>(n);
  }
}

class Fd {
 public:
  Fd(const std::filesystem::path& p, int flags, mode_t mode = 0644)
      : fd_(::open(p.c_str(), flags, mode)) {}
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  int get() const { return fd_; }

 private:
  int fd_;
};

}  // namespace

void write_new_file(const std::filesystem::path& path, std::string_view bytes,
                    bool fsync) {
  Fd fd(path, O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC);
  if (fd.get() < 0) io_fail("create", path);
  write_all(fd.get(), bytes, path);
  if (fsync && ::fsync(fd.get()) != 0) io_fail("fsync", path);
}

void append_file(const std::filesystem::path& path, std::string_view bytes,
                 bool fsync) {
  Fd fd(path, O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC);
  if (fd.get() < 0) io_fail("open", path);
  write_all(fd.get(), bytes, path);
  if (fsync && ::fdatasync(fd.get()) != 0) io_fail("fsync", path);
}

void fsync_dir(const std::filesystem::path& dir) {
  Fd fd(dir, O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd.get() >= 0) ::fsync(fd.get());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("open", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void truncate_file(const std::filesystem::path& path, std::uintmax_t size) {
  std::error_code ec;
  std::filesystem::resize_file(path, size, ec);
  if (ec) {
    throw Error(ErrorCode::IoError,
                "truncate '" + path.string() + "': " + ec.message());
  }
}

}  // namespace market::detail
