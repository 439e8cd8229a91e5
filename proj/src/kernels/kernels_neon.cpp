#include "hdphmm/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)
#define HDPHMM_HAVE_NEON_KERNELS 1
#include <arm_neon.h>
#else
#define HDPHMM_HAVE_NEON_KERNELS 0
#endif

namespace hdphmm::kernels {

#if HDPHMM_HAVE_NEON_KERNELS
namespace {

// vmulq/vaddq rather than vfmaq: keeps rounding identical to the scalar path.

void vecmat_neon(const double* w, const double* m, std::size_t rows, std::size_t cols,
                 double* out) {
    for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const float64x2_t wi = vdupq_n_f64(w[i]);
        const double* row = m + i * cols;
        std::size_t j = 0;
        for (; j + 2 <= cols; j += 2)
            vst1q_f64(out + j, vaddq_f64(vld1q_f64(out + j), vmulq_f64(wi, vld1q_f64(row + j))));
        for (; j < cols; ++j) out[j] = out[j] + w[i] * row[j];
    }
}

void overlap_neon(const double* a, const double* b, std::size_t states, std::size_t len,
                  double* out) {
    std::size_t t = 0;
    for (; t + 2 <= len; t += 2) {
        float64x2_t acc = vdupq_n_f64(0.0);
        for (std::size_t r = 0; r < states; ++r)
            acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + r * len + t), vld1q_f64(b + r * len + t)));
        vst1q_f64(out + t, acc);
    }
    for (; t < len; ++t) {
        double acc = 0.0;
        for (std::size_t r = 0; r < states; ++r) acc = acc + a[r * len + t] * b[r * len + t];
        out[t] = acc;
    }
}

void count_matches_neon(const std::int32_t* a, const std::int32_t* b, std::size_t samples,
                        std::size_t len, std::int64_t* counts) {
    std::size_t t = 0;
    for (; t + 4 <= len; t += 4) {
        uint32x4_t acc = vdupq_n_u32(0);
        for (std::size_t s = 0; s < samples; ++s) {
            const uint32x4_t eq = vceqq_s32(vld1q_s32(a + s * len + t), vld1q_s32(b + s * len + t));
            acc = vsubq_u32(acc, eq);
        }
        std::uint32_t lane[4];
        vst1q_u32(lane, acc);
        for (int l = 0; l < 4; ++l) counts[t + l] += lane[l];
    }
    for (; t < len; ++t)
        for (std::size_t s = 0; s < samples; ++s)
            counts[t] += (a[s * len + t] == b[s * len + t]) ? 1 : 0;
}

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    double sum = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

constexpr KernelTable kNeon{Isa::neon, vecmat_neon, overlap_neon, count_matches_neon, dot_neon};

}  // namespace

const KernelTable* neon_table() { return &kNeon; }

#else

const KernelTable* neon_table() { return nullptr; }

#endif

}  // namespace hdphmm::kernels
