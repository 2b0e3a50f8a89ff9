#include "adacanon/rng.hpp"

#include <cmath>

namespace adacanon {

namespace {

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
    return mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

RngStream RngStream::derive(std::uint64_t a) const {
    return RngStream(seed_, hash_combine(stream_, a));
}
RngStream RngStream::derive(std::uint64_t a, std::uint64_t b) const {
    return RngStream(seed_, hash_combine(hash_combine(stream_, a), b));
}
RngStream RngStream::derive(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
    return RngStream(seed_, hash_combine(hash_combine(hash_combine(stream_, a), b), c));
}
RngStream RngStream::derive(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                            std::uint64_t d) const {
    return RngStream(seed_,
                     hash_combine(hash_combine(hash_combine(hash_combine(stream_, a), b), c), d));
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t key = mix64(seed_) ^ mix64(stream_ * 0xda942042e4dd58b5ULL);
    return mix64(key + counter_++ * 0x9e3779b97f4a7c15ULL);
}

double RngStream::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
    // Rejection-free modulo is fine here; n is tiny relative to 2^64.
    return next_u64() % n;
}

double RngStream::next_gaussian() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = next_double();
    const double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

std::vector<double> RngStream::gaussians(std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = next_gaussian();
    return out;
}

}  // namespace adacanon
