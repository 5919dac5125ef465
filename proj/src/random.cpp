#include "sace/random.hpp"

namespace sace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    std::uint64_t z = x + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : key_(seed), engine_(splitmix64(seed)) {}

RandomStream RandomStream::split(std::uint64_t index) const {
    return RandomStream(splitmix64(key_ ^ splitmix64(index + 1)));
}

double RandomStream::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double RandomStream::normal(double mean, double sd) { return mean + sd * normal_(engine_); }

int RandomStream::bernoulli(double p) { return uniform() < p ? 1 : 0; }

std::size_t RandomStream::below(std::size_t bound) {
    return std::uniform_int_distribution<std::size_t>(0, bound - 1)(engine_);
}

}  // namespace sace
