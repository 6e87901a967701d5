#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace lattn {

// Deterministic random source. The mt19937_64 core is fully pinned by the
// standard; the helpers below avoid std:: distributions, whose output is
// implementation-defined, so that every sampled value is reproducible from
// the seed alone.
//
// All randomness in a run flows from one root seed through named substreams
// ("init", "shuffle", "sampling", ...) so the streams stay independent of
// each other and of call order.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    static Rng substream(uint64_t root_seed, std::string_view name) {
        // FNV-1a over the seed bytes then the stream name.
        uint64_t h = 0xcbf29ce484222325ull;
        for (int i = 0; i < 8; ++i) {
            h ^= (root_seed >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ull;
        }
        for (char c : name) {
            h ^= static_cast<uint8_t>(c);
            h *= 0x100000001b3ull;
        }
        return Rng(h);
    }

    uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n), unbiased via rejection.
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Uniform double in [lo, hi) from the top 53 bits.
    double uniform(double lo, double hi) {
        const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }

    // Fisher-Yates; deterministic given the stream state.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace lattn
