#include "rocbf/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace rocbf::kernels {
namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa resolve_initial() {
    if (const char* env = std::getenv("ROCBF_ISA")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
        if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Isa::avx2;
    }
    return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

Isa g_isa = resolve_initial();

}  // namespace

bool avx2_available() { return cpu_has_avx2(); }

const Ops& active() {
    return g_isa == Isa::avx2 ? avx2_ops() : scalar_ops();
}

Isa active_isa() { return g_isa; }

void force(Isa isa) {
    g_isa = (isa == Isa::avx2 && cpu_has_avx2()) ? Isa::avx2 : Isa::scalar;
}

}  // namespace rocbf::kernels
