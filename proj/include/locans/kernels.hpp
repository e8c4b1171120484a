#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace locans::kernels {

// Double-precision primitives behind every adapter forward/backward pass.
// All matrices are row-major. matvec/matvec_t overwrite y; axpy/ger accumulate.
struct Backend {
    const char* name;
    double (*dot)(const double* x, const double* y, size_t n);
    void (*axpy)(double a, const double* x, double* y, size_t n);                // y += a*x
    void (*matvec)(const double* w, const double* x, double* y, size_t rows, size_t cols);    // y = W x
    void (*matvec_t)(const double* w, const double* x, double* y, size_t rows, size_t cols);  // y = W^T x
    void (*ger)(double a, const double* x, const double* y, double* w, size_t rows, size_t cols);  // W += a x y^T
};

const Backend& scalar_backend();

// Backends usable on this machine, scalar first.
std::vector<const Backend*> available_backends();

// Active backend. Initial selection: LOCANS_KERNELS env var if set
// ("scalar"/"avx2"/"auto"), otherwise the widest supported one.
const Backend& active();
void select(const std::string& name);

inline double dot(const double* x, const double* y, size_t n) { return active().dot(x, y, n); }
inline void axpy(double a, const double* x, double* y, size_t n) { active().axpy(a, x, y, n); }
inline void matvec(const double* w, const double* x, double* y, size_t rows, size_t cols) {
    active().matvec(w, x, y, rows, cols);
}
inline void matvec_t(const double* w, const double* x, double* y, size_t rows, size_t cols) {
    active().matvec_t(w, x, y, rows, cols);
}
inline void ger(double a, const double* x, const double* y, double* w, size_t rows, size_t cols) {
    active().ger(a, x, y, w, rows, cols);
}

}  // namespace locans::kernels
