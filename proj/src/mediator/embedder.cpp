#include "concord/mediator/embedder.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "concord/core/error.hpp"
#include "concord/core/rng.hpp"
#include "concord/kernels/kernels.hpp"

namespace concord::mediator {

namespace {
constexpr std::string_view kPositionPrefix = "position:[";
}

HashingEmbedder::HashingEmbedder(size_t dims, uint64_t seed) : dims_(dims), seed_(seed) {
  if (dims_ == 0) throw ValidationError("embedding dimensionality must be at least 1");
}

std::vector<double> HashingEmbedder::embed(std::string_view text) const {
  std::vector<double> v(dims_, 0.0);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const uint64_t h = derive_seed(seed_, token);
    v[h % dims_] += (h >> 63) != 0 ? -1.0 : 1.0;
    token.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  const double norm = std::sqrt(kernels::dot(v, v));
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

std::string HashingEmbedder::model_id() const {
  return "feature-hash-v1/d" + std::to_string(dims_) + "/s" + std::to_string(seed_);
}

std::string format_position(std::span<const double> position) {
  std::string out(kPositionPrefix);
  char buf[32];
  for (size_t i = 0; i < position.size(); ++i) {
    if (i > 0) out.push_back(',');
    double x = position[i] == 0.0 ? 0.0 : position[i];  // no "-0"
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    out.append(buf, ptr);
  }
  out.push_back(']');
  return out;
}

std::optional<std::vector<double>> parse_position(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (!text.starts_with(kPositionPrefix) || !text.ends_with(']')) return std::nullopt;
  text.remove_prefix(kPositionPrefix.size());
  text.remove_suffix(1);
  std::vector<double> out;
  while (!text.empty()) {
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
    if (ec != std::errc() || !std::isfinite(x)) return std::nullopt;
    out.push_back(x);
    text.remove_prefix(static_cast<size_t>(ptr - text.data()));
    if (text.empty()) break;
    if (text.front() != ',') return std::nullopt;
    text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
  }
  if (out.empty()) return std::nullopt;
  return out;
}

std::vector<double> position_of(std::string_view text, size_t dims) {
  if (auto parsed = parse_position(text)) {
    parsed->resize(dims, 0.0);
    return *parsed;
  }
  return HashingEmbedder(dims).embed(text);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(kernels::squared_distance(a, b));
}

}  // namespace concord::mediator
