#pragma once

#include <compare>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>

namespace concord {

// Opaque string token tagged by the domain it identifies, so a participant id
// cannot be passed where a candidate id is expected.
template <class Tag>
class StrongId {
 public:
  StrongId() = default;
  explicit StrongId(std::string value) : value_(std::move(value)) {}
  explicit StrongId(std::string_view value) : value_(value) {}
  explicit StrongId(const char* value) : value_(value) {}

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const StrongId&, const StrongId&) = default;
  friend bool operator==(const StrongId&, const StrongId&) = default;

  friend std::ostream& operator<<(std::ostream& os, const StrongId& id) {
    return os << id.value_;
  }

 private:
  std::string value_;
};

struct CandidateTag {};
struct ParticipantTag {};
struct SessionTag {};

using CandidateId = StrongId<CandidateTag>;
using ParticipantId = StrongId<ParticipantTag>;
using SessionId = StrongId<SessionTag>;

}  // namespace concord

template <class Tag>
struct std::hash<concord::StrongId<Tag>> {
  size_t operator()(const concord::StrongId<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
