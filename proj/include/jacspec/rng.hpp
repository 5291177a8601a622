#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace jacspec {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Counter-based: output block = f(counter, key).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter round(const Counter& c, const Key& k) noexcept {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }

    static constexpr Counter block(Counter c, Key k) noexcept {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                k[0] += kWeyl0;
                k[1] += kWeyl1;
            }
            c = round(c, k);
        }
        return c;
    }
};

/// SplitMix64 finalizer; used to fold structured stream coordinates into one id.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Stream id for a tuple of coordinates (role, seed index, depth, layer, ...).
/// Order-sensitive; distinct tuples collide with probability ~2⁻⁶⁴.
constexpr std::uint64_t stream_id(std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = 0x6A09E667F3BCC909ull;
    for (auto c : coords) h = mix64(h ^ mix64(c));
    return h;
}

/// Deterministic random stream.
///
/// Philox4x32-10 keyed by the master seed; the 128-bit counter is
/// (block index: low 64 bits, stream id: high 64 bits), so distinct stream
/// ids walk disjoint counter ranges of the same keyed permutation. Output is
/// a pure function of (master_seed, stream_id) on every platform.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t master_seed, std::uint64_t stream)
        : master_seed_(master_seed), stream_id_(stream) {}

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream() const noexcept { return stream_id_; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
    result_type operator()() noexcept { return next_u64(); }

    std::uint64_t next_u64() noexcept {
        if (lane_ == 2) refill();
        const std::uint64_t v = static_cast<std::uint64_t>(buf_[2 * lane_]) |
                                (static_cast<std::uint64_t>(buf_[2 * lane_ + 1]) << 32);
        ++lane_;
        return v;
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open_closed() noexcept {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound) by Lemire's multiply-and-reject.
    std::uint64_t below(std::uint64_t bound) noexcept {
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Standard normal via Box–Muller; the second variate of each pair is cached.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open_closed();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    void refill() noexcept {
        const Philox4x32::Counter ctr = {
            static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
            static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
        const Philox4x32::Key key = {static_cast<std::uint32_t>(master_seed_),
                                     static_cast<std::uint32_t>(master_seed_ >> 32)};
        buf_ = Philox4x32::block(ctr, key);
        ++block_;
        lane_ = 0;
    }

    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::uint64_t block_ = 0;
    Philox4x32::Counter buf_{};
    int lane_ = 2;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline RngStream make_rng(std::uint64_t master_seed, std::uint64_t stream) {
    return RngStream(master_seed, stream);
}

inline constexpr const char* kGeneratorName = "philox4x32-10+box-muller";

}  // namespace jacspec
