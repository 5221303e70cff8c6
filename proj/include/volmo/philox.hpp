#pragma once

#include <array>
#include <cstdint>

namespace volmo {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// Resample indices are defined as a pure function of (seed, replicate, draw)
/// so any implementation can reproduce them bit-for-bit. The scheme, versioned
/// as "philox4x32-10/v1":
///
///   key     = { seed & 0xffffffff, seed >> 32 }
///   counter = { draw & 0xffffffff, draw >> 32, replicate & 0xffffffff, replicate >> 32 }
///   block   = philox4x32_10(counter, key)
///   u64     = block[0] | (block[1] << 32)
///   index   = (u64 * n) >> 64            (128-bit multiply, n = population size)
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr const char* kSchemeName = "philox4x32-10/v1";

  static Counter block(Counter ctr, Key key) noexcept;

  /// 64 random bits for the (seed, stream, position) triple.
  static std::uint64_t bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t position) noexcept;

  /// Uniform index in [0, n) for the triple, n > 0.
  static std::uint64_t index(std::uint64_t seed, std::uint64_t stream, std::uint64_t position,
                             std::uint64_t n) noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  static double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t position) noexcept;
};

}  // namespace volmo
