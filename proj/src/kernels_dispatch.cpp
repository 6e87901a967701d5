#include "lattn/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "lattn/error.hpp"

namespace lattn::kern {

#if defined(LATTN_HAVE_AVX2_TU)
const Backend& avx2_backend_impl();
#endif

bool avx2_compiled() {
#if defined(LATTN_HAVE_AVX2_TU)
    return true;
#else
    return false;
#endif
}

bool avx2_supported() {
#if defined(LATTN_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Backend& avx2_backend() {
#if defined(LATTN_HAVE_AVX2_TU)
    return avx2_backend_impl();
#else
    throw ConfigError("AVX2 kernels are not compiled into this build");
#endif
}

namespace {

const Backend& choose() {
    const char* env = std::getenv("LATTN_KERNEL");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return scalar_backend();
        if (std::strcmp(env, "avx2") == 0) {
            if (!avx2_supported()) {
                throw ConfigError("LATTN_KERNEL=avx2 but AVX2 is unavailable on this CPU/build");
            }
            return avx2_backend();
        }
        if (std::strcmp(env, "auto") != 0) {
            throw ConfigError(std::string("LATTN_KERNEL must be scalar, avx2, or auto; got ") +
                              env);
        }
    }
    return avx2_supported() ? avx2_backend() : scalar_backend();
}

}  // namespace

const Backend& active() {
    static const Backend& chosen = choose();
    return chosen;
}

}  // namespace lattn::kern
