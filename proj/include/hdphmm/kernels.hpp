#pragma once

// Data-parallel inner loops used by the HMM recursions and the pairwise
// dissimilarity builders. Each kernel has a scalar reference and optional
// AVX2 / NEON variants; one table is selected at runtime.
//
// Kernels that accumulate in a fixed per-element order (vecmat_accumulate,
// overlap_per_time, count_matches) produce results bit-identical to the
// scalar reference. dot() uses lane-parallel partial sums and agrees only to
// rounding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace hdphmm::kernels {

enum class Isa { scalar, avx2, neon };

struct KernelTable {
    Isa isa;

    // out[j] = sum_i w[i] * m[i * cols + j], i ascending. m is rows x cols,
    // w has `rows` entries, out has `cols` entries (overwritten).
    void (*vecmat)(const double* w, const double* m, std::size_t rows, std::size_t cols,
                   double* out);

    // out[t] = sum_r a[r * len + t] * b[r * len + t], r ascending.
    // a and b are state-major (states x len).
    void (*overlap_per_time)(const double* a, const double* b, std::size_t states,
                             std::size_t len, double* out);

    // counts[t] += |{ s : a[s * len + t] == b[s * len + t] }|.
    void (*count_matches)(const std::int32_t* a, const std::int32_t* b, std::size_t samples,
                          std::size_t len, std::int64_t* counts);

    double (*dot)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_table();
// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_table();
const KernelTable* neon_table();

/// Best table supported by this CPU, or the forced one.
const KernelTable& active();

/// Pin dispatch to a specific ISA. Throws ArgumentError when unavailable.
void force_isa(Isa isa);
/// Undo force_isa and return to automatic detection.
void reset_isa();

bool available(Isa isa);
std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

}  // namespace hdphmm::kernels
