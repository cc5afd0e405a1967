#pragma once

// Durable session storage. Each session is an append-only event log plus a
// snapshot of the folded state (a cache: it is rebuilt from the log whenever
// it is missing or stale) and a small metadata record holding the tokens.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "concord/core/ids.hpp"
#include "concord/protocol/events.hpp"

namespace concord::service {

using protocol::SessionEvent;

struct StoredSession {
  SessionId id;
  nlohmann::json meta;
  std::vector<SessionEvent> events;
  // Bytes of an incomplete final line that were cut off while loading.
  size_t truncated_bytes = 0;
};

class SessionStore {
 public:
  virtual ~SessionStore() = default;

  virtual std::vector<SessionId> list() const = 0;
  virtual void create(const SessionId& id, const nlohmann::json& meta) = 0;
  virtual void append(const SessionId& id, std::span<const SessionEvent> events) = 0;
  virtual void write_snapshot(const SessionId& id, const nlohmann::json& snapshot) = 0;
  virtual std::optional<std::string> read_snapshot(const SessionId& id) const = 0;
  // Raises CorruptionError for a malformed log; a torn last line (no
  // newline) is the remains of an interrupted append and is discarded.
  virtual StoredSession load(const SessionId& id) = 0;
  // Drops a session whose creation never reached its first event.
  virtual void discard(const SessionId& id) = 0;
  // Moves the session out of service, keeping its files and a diagnostic.
  virtual void quarantine(const SessionId& id, const std::string& reason) = 0;
};

// <root>/sessions/<id>/{meta.json, events.jsonl, snapshot.json}
// <root>/quarantine/<id>/{..., diagnostic.txt}
class FileStore : public SessionStore {
 public:
  explicit FileStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path session_dir(const SessionId& id) const;

  std::vector<SessionId> list() const override;
  void create(const SessionId& id, const nlohmann::json& meta) override;
  void append(const SessionId& id, std::span<const SessionEvent> events) override;
  void write_snapshot(const SessionId& id, const nlohmann::json& snapshot) override;
  std::optional<std::string> read_snapshot(const SessionId& id) const override;
  StoredSession load(const SessionId& id) override;
  void discard(const SessionId& id) override;
  void quarantine(const SessionId& id, const std::string& reason) override;

 protected:
  // The only two ways bytes reach the disk; overridden by fault-injection
  // tests.
  virtual void append_bytes(const std::filesystem::path& path, std::string_view data);
  virtual void replace_file(const std::filesystem::path& path, std::string_view data);

 private:
  std::filesystem::path root_;
};

}  // namespace concord::service
