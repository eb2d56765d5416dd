#pragma once

// Counter-based random streams: stream (seed, index) is a SplitMix64 sequence whose start
// depends only on the pair, so path i draws the same numbers on any thread count.

#include <cstdint>
#include <limits>
#include <random>

namespace turnpike {

class SplitMix64
{
  public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(state_ += 0x9e3779b97f4a7c15ULL); }

    static std::uint64_t mix(std::uint64_t z)
    {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

  private:
    std::uint64_t state_;
};

inline SplitMix64 stream(std::uint64_t seed, std::uint64_t index)
{
    return SplitMix64(SplitMix64::mix(seed ^ SplitMix64::mix(index + 0x632be59bd9b4e019ULL)));
}

/// Standard normal draws from one stream.
class NormalStream
{
  public:
    NormalStream(std::uint64_t seed, std::uint64_t index) : engine_(stream(seed, index)) {}

    double operator()() { return dist_(engine_); }

  private:
    SplitMix64 engine_;
    std::normal_distribution<double> dist_;
};

}  // namespace turnpike
