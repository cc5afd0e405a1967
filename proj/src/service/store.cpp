#include "concord/service/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <system_error>

#include "concord/core/error.hpp"
#include "concord/core/fs.hpp"

namespace concord::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_id(const SessionId& id) {
  const auto& s = id.str();
  if (s.empty() || s.size() > 64) throw ValidationError("bad session id");
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) throw ValidationError("bad session id");
  }
}

}  // namespace

FileStore::FileStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "sessions");
}

fs::path FileStore::session_dir(const SessionId& id) const {
  check_id(id);
  return root_ / "sessions" / id.str();
}

std::vector<SessionId> FileStore::list() const {
  std::vector<SessionId> out;
  for (const auto& entry : fs::directory_iterator(root_ / "sessions")) {
    if (entry.is_directory()) out.emplace_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void FileStore::create(const SessionId& id, const json& meta) {
  const auto dir = session_dir(id);
  if (fs::exists(dir)) throw Error(ErrorCode::conflict, "session '" + id.str() + "' already exists");
  fs::create_directories(dir);
  replace_file(dir / "meta.json", meta.dump(2) + "\n");
}

void FileStore::append(const SessionId& id, std::span<const SessionEvent> events) {
  std::string bytes;
  for (const auto& e : events) bytes += protocol::to_jsonl_line(e);
  append_bytes(session_dir(id) / "events.jsonl", bytes);
}

void FileStore::write_snapshot(const SessionId& id, const json& snapshot) {
  replace_file(session_dir(id) / "snapshot.json", snapshot.dump(2) + "\n");
}

std::optional<std::string> FileStore::read_snapshot(const SessionId& id) const {
  const auto path = session_dir(id) / "snapshot.json";
  if (!fs::exists(path)) return std::nullopt;
  return read_file(path);
}

StoredSession FileStore::load(const SessionId& id) {
  const auto dir = session_dir(id);
  if (!fs::exists(dir)) throw Error(ErrorCode::not_found, "no session '" + id.str() + "'");
  StoredSession stored;
  stored.id = id;
  // meta.json is written before any event; without it creation never finished
  if (!fs::exists(dir / "meta.json")) return stored;
  try {
    stored.meta = json::parse(read_file(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw CorruptionError("meta.json: " + std::string(e.what()));
  }
  const auto log = dir / "events.jsonl";
  if (!fs::exists(log)) return stored;
  std::string text = read_file(log);
  const size_t keep = text.empty() || text.back() == '\n' ? text.size() : text.rfind('\n') + 1;
  if (keep < text.size()) {
    // rfind gives npos when there is no newline at all; npos + 1 == 0
    stored.truncated_bytes = text.size() - keep;
    text.resize(keep);
    fs::resize_file(log, keep);
  }
  stored.events = protocol::parse_jsonl(text);
  return stored;
}

void FileStore::discard(const SessionId& id) { fs::remove_all(session_dir(id)); }

void FileStore::quarantine(const SessionId& id, const std::string& reason) {
  const auto target = root_ / "quarantine" / id.str();
  fs::create_directories(target.parent_path());
  fs::remove_all(target);
  fs::rename(session_dir(id), target);
  write_file_atomic(target / "diagnostic.txt", reason + "\n");
}

void FileStore::append_bytes(const fs::path& path, std::string_view data) {
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw std::system_error(errno, std::generic_category(), "open " + path.string());
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      int err = errno;
      ::close(fd);
      throw std::system_error(err, std::generic_category(), "append " + path.string());
    }
    data.remove_prefix(static_cast<size_t>(n));
  }
  ::fsync(fd);
  ::close(fd);
}

void FileStore::replace_file(const fs::path& path, std::string_view data) { write_file_atomic(path, data); }

}  // namespace concord::service
