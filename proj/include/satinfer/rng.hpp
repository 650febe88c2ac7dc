#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace satinfer {

using Engine = std::mt19937_64;

// Counter-based stream splitting. A substream is identified by
// (root seed, name, index) and seeded with
//   key  = splitmix64(splitmix64(root) ^ fnv1a64(name))
//   seed = splitmix64(key + index * 0x9E3779B97F4A7C15)
// so streams never depend on how many other streams were drawn before them.
class RngStreams {
public:
    explicit RngStreams(std::uint64_t root_seed) : root_(root_seed) {}

    std::uint64_t root_seed() const { return root_; }
    std::uint64_t substream_seed(std::string_view name, std::uint64_t index) const;
    Engine stream(std::string_view name, std::uint64_t index = 0) const {
        return Engine(substream_seed(name, index));
    }

private:
    std::uint64_t root_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(Engine& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
std::uint64_t fnv1a64(std::string_view s);

}  // namespace satinfer
