#pragma once

// Counter-based RNG: Philox4x32-10 (Salmon et al., "Parallel random numbers:
// as easy as 1, 2, 3"). Chosen over std:: engines because every draw is a pure
// function of (seed, stream, position), which gives order-independent stream
// splitting and byte-reproducible runs; std::normal_distribution is
// implementation-defined and would break that.
//
// Layout used here:
//   key     = splitmix64 finalizer of the user seed, split into two 32-bit words
//   counter = {block_lo, block_hi, stream_lo, stream_hi}
// so each (seed, stream) pair indexes an independent 2^64-block sequence.
// Gaussian draws use Box-Muller on two consecutive 53-bit uniforms:
//   u1 = (v1 >> 11) + 1 scaled by 2^-53   (in (0,1], keeps log finite)
//   u2 = (v2 >> 11)     scaled by 2^-53   (in [0,1))
//   z0 = sqrt(-2 ln u1) * cos(2 pi u2),  z1 = ... * sin(2 pi u2)

#include <cmath>
#include <cstdint>

namespace ogd {

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

} // namespace detail

class Philox {
public:
  Philox(uint64_t seed, uint64_t stream) : block_(0), pos_(4) {
    const uint64_t k = detail::splitmix64(seed);
    key0_ = static_cast<uint32_t>(k);
    key1_ = static_cast<uint32_t>(k >> 32);
    stream_lo_ = static_cast<uint32_t>(stream);
    stream_hi_ = static_cast<uint32_t>(stream >> 32);
  }

  uint32_t next_u32() {
    if (pos_ == 4) {
      fill_block();
      pos_ = 0;
    }
    return out_[pos_++];
  }

  uint64_t next_u64() {
    const uint64_t lo = next_u32();
    const uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // uniform in [0, 1) with 53 random bits
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 =
        static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; // (0,1]
    const double u2 = next_double();                             // [0,1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // one full Philox block; also the hook the known-answer tests use
  static void block4x32(const uint32_t ctr[4], const uint32_t key[2],
                        uint32_t out[4]) {
    uint32_t x0 = ctr[0], x1 = ctr[1], x2 = ctr[2], x3 = ctr[3];
    uint32_t k0 = key[0], k1 = key[1];
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        k0 += 0x9E3779B9u;
        k1 += 0xBB67AE85u;
      }
      const uint64_t p0 = 0xD2511F53ull * x0;
      const uint64_t p1 = 0xCD9E8D57ull * x2;
      const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
      const uint32_t lo0 = static_cast<uint32_t>(p0);
      const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
      const uint32_t lo1 = static_cast<uint32_t>(p1);
      const uint32_t y0 = hi1 ^ x1 ^ k0;
      const uint32_t y1 = lo1;
      const uint32_t y2 = hi0 ^ x3 ^ k1;
      const uint32_t y3 = lo0;
      x0 = y0;
      x1 = y1;
      x2 = y2;
      x3 = y3;
    }
    out[0] = x0;
    out[1] = x1;
    out[2] = x2;
    out[3] = x3;
  }

private:
  void fill_block() {
    const uint32_t ctr[4] = {static_cast<uint32_t>(block_),
                             static_cast<uint32_t>(block_ >> 32), stream_lo_,
                             stream_hi_};
    const uint32_t key[2] = {key0_, key1_};
    block4x32(ctr, key, out_);
    ++block_;
  }

  uint32_t key0_, key1_;
  uint32_t stream_lo_, stream_hi_;
  uint64_t block_;
  uint32_t out_[4] = {0, 0, 0, 0};
  int pos_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Fixed stream ids so problem generation draws each tensor from its own
// stream; adding a tensor later never shifts existing ones.
enum class Stream : uint64_t {
  data_x = 0,
  teacher = 1,
  noise = 2,
  w1_init = 3,
  w2_init = 4,
};

inline Philox make_rng(uint64_t seed, Stream s) {
  return Philox(seed, static_cast<uint64_t>(s));
}

} // namespace ogd
