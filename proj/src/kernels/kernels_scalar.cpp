#include "hdphmm/kernels.hpp"

namespace hdphmm::kernels {
namespace {

void vecmat_scalar(const double* w, const double* m, std::size_t rows, std::size_t cols,
                   double* out) {
    for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double wi = w[i];
        const double* row = m + i * cols;
        for (std::size_t j = 0; j < cols; ++j) out[j] = out[j] + wi * row[j];
    }
}

void overlap_scalar(const double* a, const double* b, std::size_t states, std::size_t len,
                    double* out) {
    for (std::size_t t = 0; t < len; ++t) out[t] = 0.0;
    for (std::size_t r = 0; r < states; ++r) {
        const double* ar = a + r * len;
        const double* br = b + r * len;
        for (std::size_t t = 0; t < len; ++t) out[t] = out[t] + ar[t] * br[t];
    }
}

void count_matches_scalar(const std::int32_t* a, const std::int32_t* b, std::size_t samples,
                          std::size_t len, std::int64_t* counts) {
    for (std::size_t s = 0; s < samples; ++s) {
        const std::int32_t* as = a + s * len;
        const std::int32_t* bs = b + s * len;
        for (std::size_t t = 0; t < len; ++t) counts[t] += (as[t] == bs[t]) ? 1 : 0;
    }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

constexpr KernelTable kScalar{Isa::scalar, vecmat_scalar, overlap_scalar, count_matches_scalar,
                              dot_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace hdphmm::kernels
