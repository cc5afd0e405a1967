#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace concord::mediator {

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  virtual std::string model_id() const = 0;
};

// Bag-of-words feature hashing: lowercase alphanumeric tokens, each hashed
// into one of `dims` buckets with a hashed sign, then L2-normalized.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(size_t dims = 256, uint64_t seed = 0x5eed);

  std::vector<double> embed(std::string_view text) const override;
  std::string model_id() const override;

 private:
  size_t dims_;
  uint64_t seed_;
};

// Canonical text rendering of a latent position, e.g. "position:[0.25,-1]".
// Coordinates use the shortest round-trip decimal form, so parse(format(x))
// reproduces x exactly.
std::string format_position(std::span<const double> position);
std::optional<std::vector<double>> parse_position(std::string_view text);

// Latent position of a text: the parsed canonical position when the text is
// one (zero-padded or truncated to `dims`), otherwise its hashing embedding in
// `dims` dimensions.
std::vector<double> position_of(std::string_view text, size_t dims);

// Embeds texts by their latent position; the natural embedder for synthetic
// populations.
class LatentEmbedder final : public Embedder {
 public:
  explicit LatentEmbedder(size_t dims) : dims_(dims) {}

  std::vector<double> embed(std::string_view text) const override { return position_of(text, dims_); }
  std::string model_id() const override { return "latent-v1/d" + std::to_string(dims_); }

 private:
  size_t dims_;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);

}  // namespace concord::mediator
