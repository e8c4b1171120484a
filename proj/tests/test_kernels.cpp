#include <cmath>
#include <doctest.h>
#include <vector>

#include "locans/common.hpp"
#include "locans/kernels.hpp"

using namespace locans;

namespace {

std::vector<double> random_vec(Rng& rng, size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.range(lo, hi);
    return v;
}

bool close(double a, double b, double rel = 1e-12) {
    return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("every available backend matches the scalar reference") {
    const auto& ref = kernels::scalar_backend();
    Rng rng(7);

    for (const auto* backend : kernels::available_backends()) {
        CAPTURE(backend->name);
        // odd sizes on purpose: the vector tails have to agree too
        for (size_t n : {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64, 67}) {
            auto x = random_vec(rng, n);
            auto y = random_vec(rng, n);
            CHECK(close(backend->dot(x.data(), y.data(), n), ref.dot(x.data(), y.data(), n)));

            auto y1 = y, y2 = y;
            backend->axpy(0.37, x.data(), y1.data(), n);
            ref.axpy(0.37, x.data(), y2.data(), n);
            for (size_t i = 0; i < n; ++i) CHECK(close(y1[i], y2[i]));
        }

        for (auto [rows, cols] : {std::pair<size_t, size_t>{3, 5}, {8, 8}, {13, 7}, {32, 64}, {1, 1}, {5, 33}}) {
            auto w = random_vec(rng, rows * cols);
            auto x = random_vec(rng, cols);
            auto xr = random_vec(rng, rows);

            std::vector<double> a(rows), b(rows);
            backend->matvec(w.data(), x.data(), a.data(), rows, cols);
            ref.matvec(w.data(), x.data(), b.data(), rows, cols);
            for (size_t i = 0; i < rows; ++i) CHECK(close(a[i], b[i]));

            std::vector<double> at(cols), bt(cols);
            backend->matvec_t(w.data(), xr.data(), at.data(), rows, cols);
            ref.matvec_t(w.data(), xr.data(), bt.data(), rows, cols);
            for (size_t i = 0; i < cols; ++i) CHECK(close(at[i], bt[i]));

            auto wa = w, wb = w;
            backend->ger(0.21, xr.data(), x.data(), wa.data(), rows, cols);
            ref.ger(0.21, xr.data(), x.data(), wb.data(), rows, cols);
            for (size_t i = 0; i < rows * cols; ++i) CHECK(close(wa[i], wb[i]));
        }
    }
}

TEST_CASE("backends agree exactly on small-integer inputs") {
    // products and sums of small integers are exact in double, with or
    // without FMA, so equality here is bitwise
    Rng rng(11);
    for (const auto* backend : kernels::available_backends()) {
        CAPTURE(backend->name);
        for (size_t n : {5, 16, 23}) {
            std::vector<double> x(n), y(n);
            for (size_t i = 0; i < n; ++i) {
                x[i] = static_cast<double>(static_cast<int>(rng.below(17)) - 8);
                y[i] = static_cast<double>(static_cast<int>(rng.below(17)) - 8);
            }
            CHECK(backend->dot(x.data(), y.data(), n) == kernels::scalar_backend().dot(x.data(), y.data(), n));
        }
    }
}

TEST_CASE("dot against a long-double reference") {
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        size_t n = 1 + rng.below(100);
        auto x = random_vec(rng, n);
        auto y = random_vec(rng, n);
        long double expect = 0.0L;
        for (size_t i = 0; i < n; ++i) expect += static_cast<long double>(x[i]) * y[i];
        for (const auto* backend : kernels::available_backends())
            CHECK(close(backend->dot(x.data(), y.data(), n), static_cast<double>(expect), 1e-10));
    }
}

TEST_CASE("matvec matches per-row dot") {
    Rng rng(5);
    size_t rows = 9, cols = 21;
    auto w = random_vec(rng, rows * cols);
    auto x = random_vec(rng, cols);
    std::vector<double> y(rows);
    kernels::matvec(w.data(), x.data(), y.data(), rows, cols);
    for (size_t r = 0; r < rows; ++r) CHECK(close(y[r], kernels::dot(w.data() + r * cols, x.data(), cols)));
}

TEST_CASE("backend selection") {
    const std::string original = kernels::active().name;
    kernels::select("scalar");
    CHECK(std::string(kernels::active().name) == "scalar");
    CHECK_THROWS_AS(kernels::select("mmx"), ConfigError);
    kernels::select("auto");
    // auto picks the widest backend this machine supports
    CHECK(std::string(kernels::active().name) == std::string(kernels::available_backends().back()->name));
    kernels::select(original);
    CHECK(std::string(kernels::active().name) == original);
}
