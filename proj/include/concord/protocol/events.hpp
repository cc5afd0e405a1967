#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace concord::protocol {

inline constexpr std::string_view kSessionSchema = "concord.session/v1";

enum class EventKind {
  session_created,
  opinion_submitted,
  candidates_generated,
  rankings_recorded,
  winner_published,
  critique_submitted,
  revised_candidates_generated,
  revised_winner_published,
  final_preference_recorded,
  phase_advanced,
  session_closed,
};

std::string_view to_string(EventKind kind);
EventKind event_kind_from_string(std::string_view name);

struct SessionEvent {
  uint64_t sequence = 0;
  // Milliseconds since the Unix epoch, or logical ticks.
  int64_t timestamp = 0;
  EventKind kind = EventKind::session_created;
  nlohmann::json payload = nlohmann::json::object();
  // Client-supplied id of the command that produced this event.
  std::optional<std::string> request_id;

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

nlohmann::json to_json(const SessionEvent& event);
SessionEvent event_from_json(const nlohmann::json& doc);

// One compact JSON document per line.
std::string to_jsonl_line(const SessionEvent& event);
std::string to_jsonl(const std::vector<SessionEvent>& events);
void write_jsonl(std::ostream& out, const std::vector<SessionEvent>& events);

// Parses a JSON-lines log. Blank lines are skipped; a line that is not a valid
// event raises CorruptionError naming the line number. Sequence density is
// checked by replay, not here.
std::vector<SessionEvent> read_jsonl(std::istream& in);
std::vector<SessionEvent> parse_jsonl(std::string_view text);

// Wall-time source for event timestamps. Sessions without one use logical
// time: each event is one tick after the previous, so logs stay reproducible.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual int64_t now_ms() = 0;
};

class SystemClock final : public Clock {
 public:
  int64_t now_ms() override;
};

}  // namespace concord::protocol
