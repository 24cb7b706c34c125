#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace fpslab {

/// SplitMix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Seed for sample `index` of a campaign with master seed `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(master ^ mix64(index + 0x632be59bd9b4e019ull));
}

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Stateless: a block of four 32-bit words is a pure function of
/// (key, counter), so any stream position can be reproduced without
/// replaying earlier draws.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit constexpr Philox4x32(std::uint64_t key) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  constexpr Block operator()(std::uint64_t hi, std::uint64_t lo) const noexcept {
    Block ctr{static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(lo >> 32),
              static_cast<std::uint32_t>(hi), static_cast<std::uint32_t>(hi >> 32)};
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0};
      k[0] += kW0;
      k[1] += kW1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
  std::array<std::uint32_t, 2> key_;
};

/// Uniform in the open interval (0, 1) from 64 random bits.
inline double open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Sequential view of one Philox stream, identified by (seed, stream id).
/// Two streams with different ids never overlap.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : gen_(mix64(seed)), stream_(stream_id) {}

  double uniform() noexcept {
    if (pos_ == 2) refill();
    return buf_[pos_++];
  }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

  /// Jump to an absolute block position; discards buffered draws.
  void seek(std::uint64_t block) noexcept {
    counter_ = block;
    pos_ = 2;
    has_spare_ = false;
  }

 private:
  void refill() noexcept {
    const auto b = gen_(stream_, counter_++);
    buf_[0] = open_unit((std::uint64_t{b[0]} << 32) | b[1]);
    buf_[1] = open_unit((std::uint64_t{b[2]} << 32) | b[3]);
    pos_ = 0;
  }

  Philox4x32 gen_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<double, 2> buf_{};
  int pos_ = 2;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Fill `out[0..n)` with standard normals from block-addressed draws, so
/// entry i depends only on (seed, stream_id, i).
template <class Vec>
void fill_normals(std::uint64_t seed, std::uint64_t stream_id, Vec& out) {
  const Philox4x32 gen(mix64(seed));
  const auto n = static_cast<std::size_t>(out.size());
  for (std::size_t i = 0; i < n; i += 2) {
    const auto b = gen(stream_id, i / 2);
    const double u1 = open_unit((std::uint64_t{b[0]} << 32) | b[1]);
    const double u2 = open_unit((std::uint64_t{b[2]} << 32) | b[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    out[i] = r * std::cos(th);
    if (i + 1 < n) out[i + 1] = r * std::sin(th);
  }
}

// Stream ids used inside one sample. Nested stages add `stage << 16`.
namespace streams {
inline constexpr std::uint64_t kGff = 1;
inline constexpr std::uint64_t kEdge = 2;
inline constexpr std::uint64_t kResample = 3;
inline constexpr std::uint64_t kOracle = 4;
inline constexpr std::uint64_t kStageShift = 16;
}  // namespace streams

}  // namespace fpslab
