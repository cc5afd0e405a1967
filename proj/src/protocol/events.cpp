#include "concord/protocol/events.hpp"

#include <array>
#include <chrono>
#include <istream>
#include <ostream>
#include <sstream>
#include <utility>

#include "concord/core/error.hpp"

namespace concord::protocol {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 11> kKindNames{{
    {EventKind::session_created, "session_created"},
    {EventKind::opinion_submitted, "opinion_submitted"},
    {EventKind::candidates_generated, "candidates_generated"},
    {EventKind::rankings_recorded, "rankings_recorded"},
    {EventKind::winner_published, "winner_published"},
    {EventKind::critique_submitted, "critique_submitted"},
    {EventKind::revised_candidates_generated, "revised_candidates_generated"},
    {EventKind::revised_winner_published, "revised_winner_published"},
    {EventKind::final_preference_recorded, "final_preference_recorded"},
    {EventKind::phase_advanced, "phase_advanced"},
    {EventKind::session_closed, "session_closed"},
}};

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

EventKind event_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw CorruptionError("unknown event kind '" + std::string(name) + "'");
}

json to_json(const SessionEvent& event) {
  json doc{{"sequence", event.sequence},
           {"timestamp", event.timestamp},
           {"kind", to_string(event.kind)},
           {"payload", event.payload}};
  if (event.request_id) doc["request_id"] = *event.request_id;
  return doc;
}

SessionEvent event_from_json(const json& doc) {
  try {
    SessionEvent event;
    event.sequence = doc.at("sequence").get<uint64_t>();
    event.timestamp = doc.at("timestamp").get<int64_t>();
    event.kind = event_kind_from_string(doc.at("kind").get<std::string>());
    event.payload = doc.at("payload");
    if (!event.payload.is_object()) throw CorruptionError("event payload is not an object");
    if (doc.contains("request_id")) event.request_id = doc.at("request_id").get<std::string>();
    return event;
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("malformed event: ") + e.what());
  }
}

std::string to_jsonl_line(const SessionEvent& event) { return to_json(event).dump() + "\n"; }

std::string to_jsonl(const std::vector<SessionEvent>& events) {
  std::string out;
  for (const auto& e : events) out += to_jsonl_line(e);
  return out;
}

void write_jsonl(std::ostream& out, const std::vector<SessionEvent>& events) {
  for (const auto& e : events) out << to_jsonl_line(e);
}

std::vector<SessionEvent> read_jsonl(std::istream& in) {
  std::vector<SessionEvent> events;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(event_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw CorruptionError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const CorruptionError& e) {
      throw CorruptionError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return events;
}

std::vector<SessionEvent> parse_jsonl(std::string_view text) {
  std::istringstream in{std::string(text)};
  return read_jsonl(in);
}

int64_t SystemClock::now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace concord::protocol
