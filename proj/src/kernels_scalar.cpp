#include "locans/kernels.hpp"

// Reference kernels. Plain loops, no reassociation tricks: this is the
// semantics the SIMD backends are equivalence-tested against.

namespace locans::kernels {
namespace {

double dot_scalar(const double* x, const double* y, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void matvec_scalar(const double* w, const double* x, double* y, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) y[r] = dot_scalar(w + r * cols, x, cols);
}

void matvec_t_scalar(const double* w, const double* x, double* y, size_t rows, size_t cols) {
    for (size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (size_t r = 0; r < rows; ++r) axpy_scalar(x[r], w + r * cols, y, cols);
}

void ger_scalar(double a, const double* x, const double* y, double* w, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) axpy_scalar(a * x[r], y, w + r * cols, cols);
}

constexpr Backend kScalar = {
    "scalar", dot_scalar, axpy_scalar, matvec_scalar, matvec_t_scalar, ger_scalar,
};

}  // namespace

const Backend& scalar_backend() { return kScalar; }

}  // namespace locans::kernels
