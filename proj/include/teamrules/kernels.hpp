#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

namespace teamrules::kernels {

/**
 * Data-parallel primitives behind the coverage bitsets and loss reductions.
 *
 * Every kernel has a scalar reference implementation and may have SIMD
 * variants (AVX2 on x86-64). The active variant is selected once at runtime
 * from CPU capabilities; select_backend() overrides it, which the
 * equivalence tests use to compare backends on identical inputs.
 *
 * Floating-point kernels are specified as a fixed summation tree (four
 * interleaved accumulators, combined (a0+a1)+(a2+a3), sequential tail) so
 * scalar and SIMD paths produce bit-identical results, not merely close
 * ones. Masked sums add `bit ? x : +0.0` for every element on both paths.
 */
struct Ops {
    // words in a & b must have equal length
    uint64_t (*popcount)(const uint64_t* words, size_t n);
    uint64_t (*and_popcount)(const uint64_t* a, const uint64_t* b, size_t n);
    uint64_t (*andnot_popcount)(const uint64_t* a, const uint64_t* b, size_t n);  // popcount(a & ~b)
    void (*or_inplace)(uint64_t* dst, const uint64_t* src, size_t n);
    void (*and_inplace)(uint64_t* dst, const uint64_t* src, size_t n);
    double (*sum)(const double* values, size_t n);
    // mask has ceil(n/64) words; value i participates iff bit i set
    double (*masked_sum)(const double* values, const uint64_t* mask, size_t n);
    const char* name;
};

enum class Backend { scalar, avx2 };

/// Kernels chosen for this process (CPU-detected unless overridden).
const Ops& ops();

/// The scalar reference implementations, always available.
const Ops& scalar_ops();

/// Force a backend. Returns false if unsupported on this CPU.
bool select_backend(Backend backend);

bool avx2_available();
std::string active_backend_name();

/// Fixed-size bit vector over instance indices, backed by the kernel layer.
class BitVec {
public:
    BitVec() = default;
    explicit BitVec(size_t bits) : bits_(bits), words_((bits + 63) / 64, 0) {}

    size_t size() const { return bits_; }
    size_t word_count() const { return words_.size(); }
    const uint64_t* words() const { return words_.data(); }
    uint64_t* words() { return words_.data(); }

    bool test(size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
    void set(size_t i) { words_[i >> 6] |= (uint64_t{1} << (i & 63)); }
    void reset(size_t i) { words_[i >> 6] &= ~(uint64_t{1} << (i & 63)); }
    void clear() { std::fill(words_.begin(), words_.end(), uint64_t{0}); }
    void fill() {
        std::fill(words_.begin(), words_.end(), ~uint64_t{0});
        trim();
    }

    uint64_t count() const { return ops().popcount(words_.data(), words_.size()); }

    uint64_t and_count(const BitVec& other) const {
        check_same_size(other);
        return ops().and_popcount(words_.data(), other.words_.data(), words_.size());
    }

    uint64_t andnot_count(const BitVec& other) const {
        check_same_size(other);
        return ops().andnot_popcount(words_.data(), other.words_.data(), words_.size());
    }

    void or_with(const BitVec& other) {
        check_same_size(other);
        ops().or_inplace(words_.data(), other.words_.data(), words_.size());
    }
    void and_with(const BitVec& other) {
        check_same_size(other);
        ops().and_inplace(words_.data(), other.words_.data(), words_.size());
    }

    /// Sum of values[i] over set bits; values.size() must equal size().
    double masked_sum(std::span<const double> values) const {
        if (values.size() != bits_) throw std::invalid_argument("masked_sum size mismatch");
        return ops().masked_sum(values.data(), words_.data(), bits_);
    }

    template <typename Fn>
    void for_each_set(Fn&& fn) const {
        for (size_t w = 0; w < words_.size(); ++w) {
            uint64_t word = words_[w];
            while (word) {
                const int bit = __builtin_ctzll(word);
                fn(w * 64 + static_cast<size_t>(bit));
                word &= word - 1;
            }
        }
    }

    bool operator==(const BitVec& other) const = default;

private:
    void check_same_size(const BitVec& other) const {
        if (bits_ != other.bits_) throw std::invalid_argument("bit vector size mismatch");
    }

    // keep bits past size() zero so popcounts stay exact
    void trim() {
        if (bits_ % 64 != 0 && !words_.empty())
            words_.back() &= (uint64_t{1} << (bits_ % 64)) - 1;
    }

    size_t bits_ = 0;
    std::vector<uint64_t> words_;
};

inline double sum(std::span<const double> values) { return ops().sum(values.data(), values.size()); }

}  // namespace teamrules::kernels
