#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace cobias {

// Counter-based deterministic generator. Output k of stream (seed, stream) is
// a pure function of (seed, stream, k), so identical seeds reproduce identical
// draws on every platform, and derived streams never overlap with the parent.
class RngState {
public:
    explicit RngState(std::uint64_t seed, std::uint64_t stream = 0);

    // Independent child stream named by a tag or an index. Deriving does not
    // advance this stream.
    RngState derive(std::string_view tag) const;
    RngState derive(std::uint64_t index) const;

    std::uint64_t next_u64();
    double next_unit();      // uniform [0, 1)
    double next_unit_pos();  // uniform (0, 1]
    double next_normal();    // standard normal via Box-Muller
    std::size_t next_below(std::size_t n);

    // Fisher-Yates permutation of {0..n-1}
    std::vector<std::size_t> permutation(std::size_t n);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace cobias
