#include "hdphmm/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define HDPHMM_HAVE_AVX2_KERNELS 1
#include <immintrin.h>
#else
#define HDPHMM_HAVE_AVX2_KERNELS 0
#endif

namespace hdphmm::kernels {

#if HDPHMM_HAVE_AVX2_KERNELS
namespace {

// Only "avx2" is enabled (not "fma") so multiply and add stay separately
// rounded, matching the scalar reference.
#define HDPHMM_AVX2 __attribute__((target("avx2")))

HDPHMM_AVX2 void vecmat_avx2(const double* w, const double* m, std::size_t rows,
                             std::size_t cols, double* out) {
    for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const __m256d wi = _mm256_set1_pd(w[i]);
        const double* row = m + i * cols;
        std::size_t j = 0;
        for (; j + 4 <= cols; j += 4) {
            const __m256d acc = _mm256_loadu_pd(out + j);
            const __m256d prod = _mm256_mul_pd(wi, _mm256_loadu_pd(row + j));
            _mm256_storeu_pd(out + j, _mm256_add_pd(acc, prod));
        }
        for (; j < cols; ++j) out[j] = out[j] + w[i] * row[j];
    }
}

HDPHMM_AVX2 void overlap_avx2(const double* a, const double* b, std::size_t states,
                              std::size_t len, double* out) {
    std::size_t t = 0;
    for (; t + 4 <= len; t += 4) {
        __m256d acc = _mm256_setzero_pd();
        for (std::size_t r = 0; r < states; ++r) {
            const __m256d prod =
                _mm256_mul_pd(_mm256_loadu_pd(a + r * len + t), _mm256_loadu_pd(b + r * len + t));
            acc = _mm256_add_pd(acc, prod);
        }
        _mm256_storeu_pd(out + t, acc);
    }
    for (; t < len; ++t) {
        double acc = 0.0;
        for (std::size_t r = 0; r < states; ++r) acc = acc + a[r * len + t] * b[r * len + t];
        out[t] = acc;
    }
}

HDPHMM_AVX2 void count_matches_avx2(const std::int32_t* a, const std::int32_t* b,
                                    std::size_t samples, std::size_t len, std::int64_t* counts) {
    std::size_t t = 0;
    alignas(32) std::int32_t lane[8];
    for (; t + 8 <= len; t += 8) {
        // Equal lanes compare to -1, so subtracting counts a match.
        __m256i acc = _mm256_setzero_si256();
        for (std::size_t s = 0; s < samples; ++s) {
            const __m256i va =
                _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + s * len + t));
            const __m256i vb =
                _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + s * len + t));
            acc = _mm256_sub_epi32(acc, _mm256_cmpeq_epi32(va, vb));
        }
        _mm256_store_si256(reinterpret_cast<__m256i*>(lane), acc);
        for (int l = 0; l < 8; ++l) counts[t + l] += lane[l];
    }
    for (; t < len; ++t)
        for (std::size_t s = 0; s < samples; ++s)
            counts[t] += (a[s * len + t] == b[s * len + t]) ? 1 : 0;
}

HDPHMM_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    double sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

constexpr KernelTable kAvx2{Isa::avx2, vecmat_avx2, overlap_avx2, count_matches_avx2, dot_avx2};

}  // namespace

const KernelTable* avx2_table() {
    static const bool supported = __builtin_cpu_supports("avx2");
    return supported ? &kAvx2 : nullptr;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace hdphmm::kernels
