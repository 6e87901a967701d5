#pragma once

#include <cstddef>

// Data-parallel inner loops behind all dense math. Two implementations:
// a portable scalar reference and an AVX2/FMA variant. The backend is picked
// once at runtime (cpuid), overridable with LATTN_KERNEL=scalar|avx2|auto.
// The two are equivalence-tested against each other; they may differ in the
// last bits because FMA contracts rounding steps.

namespace lattn::kern {

struct Backend {
    const char* name;
    double (*dot)(const double* a, const double* b, size_t n);
    void (*axpy)(double alpha, const double* x, double* y, size_t n);  // y += alpha*x
    void (*scale)(double* y, double alpha, size_t n);                  // y *= alpha
    void (*mul)(const double* x, double* y, size_t n);                 // y *= x
    double (*sum)(const double* x, size_t n);
    double (*sum_sq)(const double* x, size_t n);
};

const Backend& scalar_backend();

// True when the AVX2 translation unit was compiled in (x86-64 builds).
bool avx2_compiled();
// True when avx2_compiled() and the CPU reports AVX2+FMA.
bool avx2_supported();
// Throws ConfigError when not compiled in.
const Backend& avx2_backend();

// The dispatched backend, chosen on first use.
const Backend& active();

inline double dot(const double* a, const double* b, size_t n) { return active().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, size_t n) { active().axpy(alpha, x, y, n); }
inline void scale(double* y, double alpha, size_t n) { active().scale(y, alpha, n); }
inline void mul(const double* x, double* y, size_t n) { active().mul(x, y, n); }
inline double sum(const double* x, size_t n) { return active().sum(x, n); }
inline double sum_sq(const double* x, size_t n) { return active().sum_sq(x, n); }

}  // namespace lattn::kern
