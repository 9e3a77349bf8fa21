#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

namespace pmuev {

// ---------------------------------------------------------------- errors

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define PMUEV_DEFINE_ERROR(Name)                                            \
    struct Name : Error {                                                   \
        using Error::Error;                                                 \
    }

PMUEV_DEFINE_ERROR(DimensionError);
PMUEV_DEFINE_ERROR(ValueError);
PMUEV_DEFINE_ERROR(StatsMismatch);
PMUEV_DEFINE_ERROR(AlignmentError);
PMUEV_DEFINE_ERROR(RankError);
PMUEV_DEFINE_ERROR(NoDonorError);
PMUEV_DEFINE_ERROR(AsymmetryError);
PMUEV_DEFINE_ERROR(DisconnectedGraph);
PMUEV_DEFINE_ERROR(LengthMismatch);
PMUEV_DEFINE_ERROR(WindowTooLong);
PMUEV_DEFINE_ERROR(WindowExceedsTensor);
PMUEV_DEFINE_ERROR(ClassTooSmall);
PMUEV_DEFINE_ERROR(ShapeError);
PMUEV_DEFINE_ERROR(CacheMismatch);
PMUEV_DEFINE_ERROR(VersionError);
PMUEV_DEFINE_ERROR(CorruptFile);
PMUEV_DEFINE_ERROR(BatchMismatch);
PMUEV_DEFINE_ERROR(DomainError);
PMUEV_DEFINE_ERROR(OracleUnavailable);
PMUEV_DEFINE_ERROR(UnsupportedConfig);
PMUEV_DEFINE_ERROR(DivergenceError);
PMUEV_DEFINE_ERROR(EmptyInput);
PMUEV_DEFINE_ERROR(EmptyTrain);
PMUEV_DEFINE_ERROR(ProvenanceError);

#undef PMUEV_DEFINE_ERROR

// ------------------------------------------------------------------- rng
//
// mt19937_64 gives a bit-exact stream on every platform, but the standard
// distributions do not.  All derived draws are implemented here so that
// identical seeds give identical byte streams everywhere.

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform on [0, 1), 53-bit resolution
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer on [lo, hi], inclusive, via rejection sampling
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi < lo) throw ValueError("uniform_int: empty range");
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(engine_());  // full u64 range
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    // standard normal via Box-Muller; the spare is cached
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(
                uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// splitmix64, used to derive independent sub-seeds from (seed, tag)
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = seed;
    for (const char c : tag) h = (h ^ static_cast<std::uint8_t>(c)) * 0x100000001b3ULL;
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

// -------------------------------------------------------------- hashing

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : bytes) h = (h ^ static_cast<std::uint8_t>(c)) * 0x100000001b3ULL;
    return h;
}

std::string hex64(std::uint64_t value);

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace pmuev
