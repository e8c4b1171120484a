#include "locans/kernels.hpp"

// AVX2+FMA backend, 4 doubles per lane. Only compiled into the build on
// x86-64; runtime selection still checks cpuid before handing it out.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace locans::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* x, const double* y, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_avx2(double a, const double* x, double* y, size_t n) {
    __m256d av = _mm256_set1_pd(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void matvec_avx2(const double* w, const double* x, double* y, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) y[r] = dot_avx2(w + r * cols, x, cols);
}

void matvec_t_avx2(const double* w, const double* x, double* y, size_t rows, size_t cols) {
    for (size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (size_t r = 0; r < rows; ++r) axpy_avx2(x[r], w + r * cols, y, cols);
}

void ger_avx2(double a, const double* x, const double* y, double* w, size_t rows, size_t cols) {
    for (size_t r = 0; r < rows; ++r) axpy_avx2(a * x[r], y, w + r * cols, cols);
}

}  // namespace

const Backend* avx2_backend_if_supported() {
    static constexpr Backend kAvx2 = {
        "avx2", dot_avx2, axpy_avx2, matvec_avx2, matvec_t_avx2, ger_avx2,
    };
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &kAvx2;
    return nullptr;
}

}  // namespace locans::kernels

#else

namespace locans::kernels {
const Backend* avx2_backend_if_supported() { return nullptr; }
}  // namespace locans::kernels

#endif
