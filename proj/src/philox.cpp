#include "volmo/philox.hpp"

namespace volmo {

namespace {
constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}
}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) noexcept {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t Philox4x32::bits(std::uint64_t seed, std::uint64_t stream, std::uint64_t position) noexcept {
  const Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const Counter ctr{static_cast<std::uint32_t>(position), static_cast<std::uint32_t>(position >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  const auto out = block(ctr, key);
  return static_cast<std::uint64_t>(out[0]) | (static_cast<std::uint64_t>(out[1]) << 32);
}

std::uint64_t Philox4x32::index(std::uint64_t seed, std::uint64_t stream, std::uint64_t position,
                                std::uint64_t n) noexcept {
  const unsigned __int128 wide = static_cast<unsigned __int128>(bits(seed, stream, position)) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

double Philox4x32::uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t position) noexcept {
  return static_cast<double>(bits(seed, stream, position) >> 11) * 0x1.0p-53;
}

}  // namespace volmo
