#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace teamrules {

enum class ErrorKind {
    // data
    MissingLabelColumn,
    NonBinaryLabel,
    ParseError,
    CountsExceedSize,
    // rules
    SchemaMismatch,
    ZeroCoverage,
    EmptyPool,
    InvalidRule,
    // humansim
    NoMatchingRule,
    ConfidenceOutOfRange,
    // estimators
    SingleClassTrainingSet,
    NonConvergence,
    InsufficientRecords,
    SingleClassRecords,
    // advisor
    NoCoveringRule,
    // config / io
    ConfigError,
    IoError,
};

inline const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MissingLabelColumn: return "MissingLabelColumn";
        case ErrorKind::NonBinaryLabel: return "NonBinaryLabel";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::CountsExceedSize: return "CountsExceedSize";
        case ErrorKind::SchemaMismatch: return "SchemaMismatch";
        case ErrorKind::ZeroCoverage: return "ZeroCoverage";
        case ErrorKind::EmptyPool: return "EmptyPool";
        case ErrorKind::InvalidRule: return "InvalidRule";
        case ErrorKind::NoMatchingRule: return "NoMatchingRule";
        case ErrorKind::ConfidenceOutOfRange: return "ConfidenceOutOfRange";
        case ErrorKind::SingleClassTrainingSet: return "SingleClassTrainingSet";
        case ErrorKind::NonConvergence: return "NonConvergence";
        case ErrorKind::InsufficientRecords: return "InsufficientRecords";
        case ErrorKind::SingleClassRecords: return "SingleClassRecords";
        case ErrorKind::NoCoveringRule: return "NoCoveringRule";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Error";
}

/// Typed runtime error. what() is "<KindName>: <detail>" so CLI error output
/// and tests can match on the kind by name.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + detail), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// xoshiro256** with explicit, platform-independent output mappings.
/// std::shuffle / std::uniform_*_distribution are avoided throughout the
/// project because their sequences are implementation-defined; every draw
/// here is reproducible from the seed alone.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t uniform_int(uint64_t n) {
        // Rejection sampling on the top bits; unbiased and portable.
        const uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
        for (;;) {
            const uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Independent substream derived from this generator's seed material and a
    /// stream label; used so parallel tasks draw identical values regardless
    /// of scheduling.
    Rng derive(uint64_t stream) const {
        uint64_t mix = state_[0] ^ rotl(state_[2], 13) ^ (stream * 0x9e3779b97f4a7c15ull);
        return Rng(splitmix64(mix));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4];
};

/// Deterministic Fisher-Yates over an index vector.
template <typename T>
void shuffle_inplace(std::vector<T>& values, Rng& rng) {
    for (size_t i = values.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.uniform_int(i));
        std::swap(values[i - 1], values[j]);
    }
}

inline uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    uint64_t hash = seed;
    for (size_t i = 0; i < len; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace teamrules
