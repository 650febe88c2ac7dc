#include "satinfer/rng.hpp"

namespace satinfer {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t RngStreams::substream_seed(std::string_view name, std::uint64_t index) const {
    const std::uint64_t key = splitmix64(splitmix64(root_) ^ fnv1a64(name));
    return splitmix64(key + index * 0x9E3779B97F4A7C15ULL);
}

}  // namespace satinfer
