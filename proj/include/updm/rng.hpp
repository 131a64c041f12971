#pragma once

#include <cstdint>

namespace updm {

// Deterministic, platform-independent random stream (splitmix64 core,
// Box-Muller gaussians). Every stochastic routine in the project takes a
// stream or a derived seed explicitly; nothing reads global RNG state.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    // uniform in [0, 1)
    double uniform();

    // standard normal via Box-Muller; second draw of each pair is cached
    double gaussian();

    // uniform integer in [lo, hi], inclusive
    int uniform_int(int lo, int hi);

    // derive a child stream; advances this stream by one draw
    RandomStream fork();

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stable seed derivation for addressable substreams (per-sample, per-cell).
// Mixing is order-sensitive: derive_seed(s,a,b) != derive_seed(s,b,a).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace updm
