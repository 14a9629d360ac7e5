#include "teamrules/kernels.hpp"

#include <atomic>
#include <cstring>

#if defined(__x86_64__) || defined(_M_X64)
#define TEAMRULES_X86 1
#endif

namespace teamrules::kernels {

#ifdef TEAMRULES_X86
// defined in kernels_avx2.cpp (compiled with -mavx2)
const Ops& avx2_ops_impl();
#endif

namespace {

uint64_t scalar_popcount(const uint64_t* words, size_t n) {
    uint64_t total = 0;
    for (size_t i = 0; i < n; ++i) total += static_cast<uint64_t>(__builtin_popcountll(words[i]));
    return total;
}

uint64_t scalar_and_popcount(const uint64_t* a, const uint64_t* b, size_t n) {
    uint64_t total = 0;
    for (size_t i = 0; i < n; ++i) total += static_cast<uint64_t>(__builtin_popcountll(a[i] & b[i]));
    return total;
}

uint64_t scalar_andnot_popcount(const uint64_t* a, const uint64_t* b, size_t n) {
    uint64_t total = 0;
    for (size_t i = 0; i < n; ++i) total += static_cast<uint64_t>(__builtin_popcountll(a[i] & ~b[i]));
    return total;
}

void scalar_or_inplace(uint64_t* dst, const uint64_t* src, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] |= src[i];
}

void scalar_and_inplace(uint64_t* dst, const uint64_t* src, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] &= src[i];
}

// Four-accumulator stride sum. The AVX2 kernel performs the same additions in
// the same order (lane j accumulates elements 4i+j), so both backends round
// identically.
double scalar_sum(const double* values, size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    const size_t main = n / 4 * 4;
    for (size_t i = 0; i < main; i += 4) {
        acc[0] += values[i];
        acc[1] += values[i + 1];
        acc[2] += values[i + 2];
        acc[3] += values[i + 3];
    }
    double total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (size_t i = main; i < n; ++i) total += values[i];
    return total;
}

double scalar_masked_sum(const double* values, const uint64_t* mask, size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    const size_t main = n / 4 * 4;
    for (size_t i = 0; i < main; i += 4) {
        const uint64_t word = mask[i >> 6];
        const unsigned shift = static_cast<unsigned>(i & 63);
        acc[0] += (word >> shift & 1u) ? values[i] : 0.0;
        acc[1] += (word >> (shift + 1) & 1u) ? values[i + 1] : 0.0;
        acc[2] += (word >> (shift + 2) & 1u) ? values[i + 2] : 0.0;
        acc[3] += (word >> (shift + 3) & 1u) ? values[i + 3] : 0.0;
    }
    double total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (size_t i = main; i < n; ++i) total += (mask[i >> 6] >> (i & 63) & 1u) ? values[i] : 0.0;
    return total;
}

constexpr Ops kScalarOps = {
    scalar_popcount,        scalar_and_popcount, scalar_andnot_popcount, scalar_or_inplace,
    scalar_and_inplace,     scalar_sum,          scalar_masked_sum,      "scalar",
};

std::atomic<const Ops*> g_active{nullptr};

const Ops* detect() {
#ifdef TEAMRULES_X86
    if (avx2_available()) return &avx2_ops_impl();
#endif
    return &kScalarOps;
}

}  // namespace

bool avx2_available() {
#ifdef TEAMRULES_X86
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

const Ops& scalar_ops() { return kScalarOps; }

const Ops& ops() {
    const Ops* active = g_active.load(std::memory_order_acquire);
    if (!active) {
        active = detect();
        g_active.store(active, std::memory_order_release);
    }
    return *active;
}

bool select_backend(Backend backend) {
    switch (backend) {
        case Backend::scalar:
            g_active.store(&kScalarOps, std::memory_order_release);
            return true;
        case Backend::avx2:
#ifdef TEAMRULES_X86
            if (avx2_available()) {
                g_active.store(&avx2_ops_impl(), std::memory_order_release);
                return true;
            }
#endif
            return false;
    }
    return false;
}

std::string active_backend_name() { return ops().name; }

}  // namespace teamrules::kernels
