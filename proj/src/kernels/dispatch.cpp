#include <cstdlib>
#include <cstring>

#include "sumbt/kernels/kernels.hpp"

namespace sumbt::kernels {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

bool force_scalar() {
    const char* env = std::getenv("SUMBT_KERNELS");
    return env != nullptr && std::strcmp(env, "scalar") == 0;
}

template <typename T>
const Kernels<T>& select() {
#if defined(__x86_64__) || defined(_M_X64)
    if (cpu_has_avx2() && !force_scalar()) return avx2_kernels<T>();
#endif
    return scalar_kernels<T>();
}

}  // namespace

template <>
const Kernels<float>& active<float>() {
    static const Kernels<float>& table = select<float>();
    return table;
}

template <>
const Kernels<double>& active<double>() {
    static const Kernels<double>& table = select<double>();
    return table;
}

}  // namespace sumbt::kernels
