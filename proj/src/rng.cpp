#include "cobias/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace cobias {

namespace {

// splitmix64 finalizer; full-avalanche 64-bit mix
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

RngState::RngState(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(mix64(seed) ^ mix64(stream))) {}

RngState RngState::derive(std::string_view tag) const {
    return RngState(seed_, mix64(stream_ ^ hash_tag(tag)));
}

RngState RngState::derive(std::uint64_t index) const {
    return RngState(seed_, mix64(stream_ ^ mix64(index + 0x9e3779b97f4a7c15ULL)));
}

std::uint64_t RngState::next_u64() {
    return mix64(key_ ^ mix64(counter_++));
}

double RngState::next_unit() {
    // 53 random bits over [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::next_unit_pos() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double RngState::next_normal() {
    // Box-Muller; the sine branch is discarded so each draw costs one pair
    double u1 = next_unit_pos();
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t RngState::next_below(std::size_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be positive");
    // modulo bias is < n / 2^64, far below anything observable at desk scale
    return static_cast<std::size_t>(next_u64() % n);
}

std::vector<std::size_t> RngState::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = next_below(i);
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

}  // namespace cobias
