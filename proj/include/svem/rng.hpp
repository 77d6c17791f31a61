#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace svem {

/// Philox4x32-10 counter-based generator.
///
/// A stream is identified by (seed, stream id): the seed fills the 64-bit key
/// and the stream id occupies the upper 64 bits of the 128-bit counter, so
/// substream `s` of seed `k` never overlaps substream `t != s`. Every
/// replicate, permutation, or simulation run draws from its own substream,
/// which makes serial and threaded runs produce identical numbers.
class Philox4x32 {
public:
    using result_type = std::uint32_t;

    explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (index_ == 4) {
            block_ = generate(counter_, key_);
            increment();
            index_ = 0;
        }
        return block_[index_++];
    }

    static std::array<std::uint32_t, 4> generate(std::array<std::uint32_t, 4> ctr,
                                                 std::array<std::uint32_t, 2> key) noexcept;

private:
    void increment() noexcept {
        if (++counter_[0] == 0) ++counter_[1];
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> counter_;
    std::array<std::uint32_t, 4> block_{};
    int index_ = 4;
};

/// Portable random variates on top of Philox. Distribution transforms are
/// written out here rather than taken from <random>, whose algorithms differ
/// between standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) : seed_(seed), engine_(seed, stream) {}

    /// Independent generator for substream `stream` of this generator's seed.
    Rng substream(std::uint64_t stream) const { return Rng(seed_, stream); }
    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t hi = engine_();
        return (hi << 32) | engine_();
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n);
    double normal();
    double exponential();
    double laplace(double scale);
    /// Beta(1/2, 1/2), the arcsine law.
    double arcsine();
    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[below(i)]);
        }
    }
    template <typename T>
    void shuffle(std::vector<T>& values) {
        shuffle(std::span<T>(values));
    }

    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::uint64_t seed_;
    Philox4x32 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Mixes a 64-bit value (splitmix64 finalizer). Used to derive child seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace svem
