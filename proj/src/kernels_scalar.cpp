#include "lattn/kernels.hpp"

namespace lattn::kern {

namespace {

double dot_scalar(const double* a, const double* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_scalar(double* y, double alpha, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] *= alpha;
}

void mul_scalar(const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] *= x[i];
}

double sum_scalar(const double* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sum_sq_scalar(const double* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

}  // namespace

const Backend& scalar_backend() {
    static const Backend backend{
        "scalar", dot_scalar, axpy_scalar, scale_scalar, mul_scalar, sum_scalar, sum_sq_scalar,
    };
    return backend;
}

}  // namespace lattn::kern
