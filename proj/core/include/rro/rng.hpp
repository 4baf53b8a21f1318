#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace rro {

// Position in a tree of random substreams. Children are derived by hashing,
// so a substream depends only on its key path and never on how many draws
// were taken from siblings. This is what keeps parallel rollout evaluation
// bit-identical to sequential evaluation.
class StreamKey {
 public:
  constexpr StreamKey() = default;
  constexpr explicit StreamKey(std::uint64_t seed) : value_(seed) {}

  StreamKey child(std::uint64_t tag) const;
  StreamKey child(std::initializer_list<std::uint64_t> tags) const;

  constexpr std::uint64_t value() const { return value_; }
  friend constexpr bool operator==(StreamKey, StreamKey) = default;

 private:
  std::uint64_t value_ = 0;
};

// Tags for the fixed substream layout used by the sampling pipeline.
namespace stream_tag {
inline constexpr std::uint64_t kCandidate = 0x63616e64;  // "cand"
inline constexpr std::uint64_t kRollout = 0x726f6c6c;    // "roll"
inline constexpr std::uint64_t kPrefix = 0x70726566;     // "pref"
inline constexpr std::uint64_t kAction = 0x61637469;     // "acti"
inline constexpr std::uint64_t kTask = 0x7461736b;       // "task"
inline constexpr std::uint64_t kPrev = 0x70726576;       // "prev"
}  // namespace stream_tag

// Deterministic random stream. Uniform variates are built from the top 53 bits
// of mt19937_64 output so results do not depend on the standard library's
// distribution implementations.
class RngStream {
 public:
  explicit RngStream(StreamKey key);
  explicit RngStream(std::uint64_t seed) : RngStream(StreamKey(seed)) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  // Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);
  // Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace rro
