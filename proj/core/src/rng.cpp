#include "rro/rng.hpp"

#include <cmath>
#include <numbers>

namespace rro {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

StreamKey StreamKey::child(std::uint64_t tag) const {
  return StreamKey(mix64(mix64(value_) ^ (tag * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL)));
}

StreamKey StreamKey::child(std::initializer_list<std::uint64_t> tags) const {
  StreamKey k = *this;
  for (auto t : tags) k = k.child(t);
  return k;
}

RngStream::RngStream(StreamKey key) : engine_(mix64(key.value())) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t RngStream::below(std::size_t n) {
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t bound = n;
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

double RngStream::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rro
