#pragma once

#include <cstdint>
#include <random>

namespace sace {

/// Seedable, splittable random stream.
///
/// Each stream is identified by a 64-bit key. The generator is a
/// std::mt19937_64 seeded with splitmix64(key); `split(i)` derives the
/// child key splitmix64(key ^ splitmix64(i + 1)), so children depend only
/// on (parent key, index) and never on how much the parent has been used.
/// Distributions come from <random>, which makes draws bit-reproducible
/// for a given seed on one standard-library implementation.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed);

    std::uint64_t key() const noexcept { return key_; }
    RandomStream split(std::uint64_t index) const;

    double uniform();  // [0, 1)
    double normal(double mean = 0.0, double sd = 1.0);
    int bernoulli(double p);
    std::size_t below(std::size_t bound);  // uniform on {0, ..., bound-1}

  private:
    std::uint64_t key_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace sace
