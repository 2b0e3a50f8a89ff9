#pragma once

#include <cstdint>
#include <vector>

namespace adacanon {

/// Counter-based splittable generator: every draw is a pure function of
/// (seed, stream, counter), so identical (seed, stream-id) replays the
/// same sequence no matter how work is scheduled across threads. Streams
/// are value types; derive() hashes tags into fresh stream ids.
class RngStream {
public:
    RngStream() = default;
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_(stream_id) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }

    /// New stream with id mixed from this stream and the given tags.
    RngStream derive(std::uint64_t a) const;
    RngStream derive(std::uint64_t a, std::uint64_t b) const;
    RngStream derive(std::uint64_t a, std::uint64_t b, std::uint64_t c) const;
    RngStream derive(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) const;

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double next_double();

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n);

    /// Standard normal via Box-Muller (pairs cached).
    double next_gaussian();

    std::vector<double> gaussians(std::size_t n);

private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// 64-bit mix used for stream derivation and dataset checksums.
std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v);

/// FNV-1a over raw bytes; content fingerprints for caches and manifests.
std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace adacanon
