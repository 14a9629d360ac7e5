// AVX2 kernel variants. This translation unit is compiled with -mavx2 and is
// only entered after a runtime CPU check in kernels.cpp.

#include "teamrules/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace teamrules::kernels {

namespace {

// Byte-wise popcount via the nibble lookup trick, summed per 64-bit lane.
inline __m256i popcount_epi64(__m256i v) {
    const __m256i lookup = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                                            0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
    const __m256i low_mask = _mm256_set1_epi8(0x0f);
    const __m256i lo = _mm256_and_si256(v, low_mask);
    const __m256i hi = _mm256_and_si256(_mm256_srli_epi32(v, 4), low_mask);
    const __m256i cnt = _mm256_add_epi8(_mm256_shuffle_epi8(lookup, lo), _mm256_shuffle_epi8(lookup, hi));
    return _mm256_sad_epu8(cnt, _mm256_setzero_si256());
}

inline uint64_t reduce_epi64(__m256i acc) {
    const __m128i lo = _mm256_castsi256_si128(acc);
    const __m128i hi = _mm256_extracti128_si256(acc, 1);
    const __m128i sum = _mm_add_epi64(lo, hi);
    return static_cast<uint64_t>(_mm_extract_epi64(sum, 0)) + static_cast<uint64_t>(_mm_extract_epi64(sum, 1));
}

uint64_t avx2_popcount(const uint64_t* words, size_t n) {
    __m256i acc = _mm256_setzero_si256();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_epi64(acc, popcount_epi64(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(words + i))));
    uint64_t total = reduce_epi64(acc);
    for (; i < n; ++i) total += static_cast<uint64_t>(__builtin_popcountll(words[i]));
    return total;
}

uint64_t avx2_and_popcount(const uint64_t* a, const uint64_t* b, size_t n) {
    __m256i acc = _mm256_setzero_si256();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        acc = _mm256_add_epi64(acc, popcount_epi64(_mm256_and_si256(va, vb)));
    }
    uint64_t total = reduce_epi64(acc);
    for (; i < n; ++i) total += static_cast<uint64_t>(__builtin_popcountll(a[i] & b[i]));
    return total;
}

uint64_t avx2_andnot_popcount(const uint64_t* a, const uint64_t* b, size_t n) {
    __m256i acc = _mm256_setzero_si256();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        // andnot computes ~first & second
        acc = _mm256_add_epi64(acc, popcount_epi64(_mm256_andnot_si256(vb, va)));
    }
    uint64_t total = reduce_epi64(acc);
    for (; i < n; ++i) total += static_cast<uint64_t>(__builtin_popcountll(a[i] & ~b[i]));
    return total;
}

void avx2_or_inplace(uint64_t* dst, const uint64_t* src, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256i vd = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
        const __m256i vs = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_or_si256(vd, vs));
    }
    for (; i < n; ++i) dst[i] |= src[i];
}

void avx2_and_inplace(uint64_t* dst, const uint64_t* src, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256i vd = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
        const __m256i vs = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_and_si256(vd, vs));
    }
    for (; i < n; ++i) dst[i] &= src[i];
}

inline double reduce_pd(__m256d acc) {
    // (a0+a1) + (a2+a3), matching the scalar reference combine order
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const double a0 = _mm_cvtsd_f64(lo);
    const double a1 = _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
    const double a2 = _mm_cvtsd_f64(hi);
    const double a3 = _mm_cvtsd_f64(_mm_unpackhi_pd(hi, hi));
    return (a0 + a1) + (a2 + a3);
}

double avx2_sum(const double* values, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    const size_t main = n / 4 * 4;
    for (size_t i = 0; i < main; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(values + i));
    double total = reduce_pd(acc);
    for (size_t i = main; i < n; ++i) total += values[i];
    return total;
}

// 16 lane-mask patterns indexed by a nibble of the bit mask.
struct NibbleMasks {
    __m256d masks[16];
    NibbleMasks() {
        alignas(32) uint64_t row[4];
        for (int m = 0; m < 16; ++m) {
            for (int j = 0; j < 4; ++j) row[j] = (m >> j & 1) ? ~uint64_t{0} : 0;
            masks[m] = _mm256_load_pd(reinterpret_cast<const double*>(row));
        }
    }
};

double avx2_masked_sum(const double* values, const uint64_t* mask, size_t n) {
    static const NibbleMasks tables;
    __m256d acc = _mm256_setzero_pd();
    const size_t main = n / 4 * 4;
    for (size_t i = 0; i < main; i += 4) {
        const unsigned nib = static_cast<unsigned>(mask[i >> 6] >> (i & 63)) & 0xf;
        const __m256d v = _mm256_and_pd(tables.masks[nib], _mm256_loadu_pd(values + i));
        acc = _mm256_add_pd(acc, v);
    }
    double total = reduce_pd(acc);
    for (size_t i = main; i < n; ++i) total += (mask[i >> 6] >> (i & 63) & 1u) ? values[i] : 0.0;
    return total;
}

constexpr Ops kAvx2Ops = {
    avx2_popcount,    avx2_and_popcount, avx2_andnot_popcount, avx2_or_inplace,
    avx2_and_inplace, avx2_sum,          avx2_masked_sum,      "avx2",
};

}  // namespace

const Ops& avx2_ops_impl() { return kAvx2Ops; }

}  // namespace teamrules::kernels

#endif  // x86-64
