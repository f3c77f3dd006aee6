#pragma once

#include <cstdint>
#include <random>

namespace pq {

// Seeded 64-bit stream. Equal (seed, stream_id) pairs give identical
// sequences; the engine state is derived through std::seed_seq, whose
// output is fixed by the standard, so sequences are portable.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t bits() { return engine_(); }

  // Uniform on (0, 1], 53-bit resolution.
  double uniform() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

}  // namespace pq
