#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace vidinr {

/// Seedable random stream with a serializable state.
///
/// Normal variates use Box-Muller without caching a spare value, so the
/// engine state alone fully determines the future of the stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Child stream whose seed mixes this stream's seed with `name`.
    static Rng derive(std::uint64_t master_seed, std::string_view name);

    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    double normal();                        // N(0, 1)
    std::int64_t integer(std::int64_t lo, std::int64_t hi);  // inclusive

    std::vector<float> normal_vector(std::size_t n);

    std::string state() const;
    void set_state(const std::string& text);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// 64-bit FNV-1a, used for config digests and stream derivation.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace vidinr
