#include <cstdlib>
#include <cstring>

#include "fermipair/kernels.hpp"

namespace fermipair::kernels {

extern const KernelTable kAvx2Table;

const KernelTable* avx2() {
    static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok ? &kAvx2Table : nullptr;
}

const KernelTable& active() {
    static const KernelTable* chosen = [] {
        const char* env = std::getenv("FERMIPAIR_SIMD");
        if (env && std::strcmp(env, "scalar") == 0) return &scalar();
        const KernelTable* v = avx2();
        return v ? v : &scalar();
    }();
    return *chosen;
}

}  // namespace fermipair::kernels
