#include <atomic>
#include <cstdlib>
#include <string>

#include "hdphmm/errors.hpp"
#include "hdphmm/kernels.hpp"

namespace hdphmm::kernels {
namespace {

const KernelTable* table_for(Isa isa) {
    switch (isa) {
        case Isa::scalar: return &scalar_table();
        case Isa::avx2: return avx2_table();
        case Isa::neon: return neon_table();
    }
    return nullptr;
}

const KernelTable& detect() {
    // HDPHMM_ISA=scalar|avx2|neon pins the choice for a whole process.
    if (const char* env = std::getenv("HDPHMM_ISA")) {
        if (const KernelTable* t = table_for(parse_isa(env))) return *t;
    }
    if (const KernelTable* t = avx2_table()) return *t;
    if (const KernelTable* t = neon_table()) return *t;
    return scalar_table();
}

std::atomic<const KernelTable*> g_forced{nullptr};

}  // namespace

const KernelTable& active() {
    if (const KernelTable* forced = g_forced.load(std::memory_order_acquire)) return *forced;
    static const KernelTable& detected = detect();
    return detected;
}

void force_isa(Isa isa) {
    const KernelTable* t = table_for(isa);
    if (t == nullptr)
        throw ArgumentError("kernel ISA '" + std::string(isa_name(isa)) + "' is not available");
    g_forced.store(t, std::memory_order_release);
}

void reset_isa() { g_forced.store(nullptr, std::memory_order_release); }

bool available(Isa isa) { return table_for(isa) != nullptr; }

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

Isa parse_isa(std::string_view name) {
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2") return Isa::avx2;
    if (name == "neon") return Isa::neon;
    throw ArgumentError("unknown kernel ISA '" + std::string(name) + "'");
}

}  // namespace hdphmm::kernels
