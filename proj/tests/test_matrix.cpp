#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "tsmi/errors.hpp"
#include "tsmi/matrix.hpp"
#include "tsmi/rng.hpp"

using namespace tsmi;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Matrix m(r, c);
    Rng rng(seed);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = static_cast<real>(normal(rng));
    return m;
}

// Plain triple-loop oracle, independent of the library kernels.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0;
            for (std::size_t k = 0; k < a.cols(); ++k)
                acc += static_cast<double>(a(i, k)) * b(k, j);
            out(i, j) = static_cast<real>(acc);
        }
    return out;
}

bool approx_equal(const Matrix& a, const Matrix& b, double tol) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(static_cast<double>(a.data()[i]) - b.data()[i]) > tol) return false;
    return true;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.same_shape(b) &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(real)) == 0;
}

}  // namespace

TEST_CASE("matmul matches a naive triple-loop oracle") {
    const Matrix a = random_matrix(17, 23, 1);
    const Matrix b = random_matrix(23, 9, 2);
    CHECK(approx_equal(matmul(a, b), naive_matmul(a, b), 1e-4));
}

TEST_CASE("parallel kernels are bitwise identical to the serial references") {
    const Matrix a = random_matrix(33, 41, 3);
    const Matrix b = random_matrix(41, 15, 4);
    const Matrix c = random_matrix(33, 15, 5);
    CHECK(bitwise_equal(matmul(a, b), matmul_serial(a, b)));
    CHECK(bitwise_equal(matmul_nt(c, b), matmul_nt_serial(c, b)));  // (33x15)*(41x15)^T
    CHECK(bitwise_equal(matmul_tn(a, c), matmul_tn_serial(a, c)));  // (33x41)^T*(33x15)
}

TEST_CASE("transposed variants agree with explicit transposition") {
    const Matrix a = random_matrix(7, 11, 6);
    const Matrix b = random_matrix(5, 11, 7);
    Matrix bt(11, 5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 11; ++j) bt(j, i) = b(i, j);
    CHECK(approx_equal(matmul_nt(a, b), naive_matmul(a, bt), 1e-4));

    const Matrix c = random_matrix(7, 4, 8);
    Matrix at(11, 7);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 11; ++j) at(j, i) = a(i, j);
    CHECK(approx_equal(matmul_tn(a, c), naive_matmul(at, c), 1e-4));
}

TEST_CASE("matmul rejects mismatched shapes with both shapes named") {
    const Matrix a(3, 4), b(5, 2);
    CHECK_THROWS_AS(matmul(a, b), DimensionError);
    try {
        matmul(a, b);
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find('3') != std::string::npos);
        CHECK(msg.find('5') != std::string::npos);
    }
}

TEST_CASE("softmax rows are positive, normalized and monotone") {
    const Matrix x = random_matrix(6, 12, 9);
    const Matrix p = softmax_rows(x);
    for (std::size_t i = 0; i < p.rows(); ++i) {
        double sum = 0;
        for (std::size_t j = 0; j < p.cols(); ++j) {
            CHECK(p(i, j) > 0);
            sum += p(i, j);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
        for (std::size_t j = 0; j + 1 < p.cols(); ++j)
            CHECK(((x(i, j) < x(i, j + 1)) == (p(i, j) < p(i, j + 1))));
    }
}

TEST_CASE("softmax survives large inputs via max subtraction") {
    Matrix x(1, 3);
    x(0, 0) = real(1000);
    x(0, 1) = real(1001);
    x(0, 2) = real(999);
    const Matrix p = softmax_rows(x);
    CHECK(p.all_finite());
    CHECK(p(0, 1) > p(0, 0));
    CHECK(p(0, 0) > p(0, 2));
}

TEST_CASE("softmax backward matches finite differences") {
    const Matrix x = random_matrix(3, 5, 10);
    const Matrix up = random_matrix(3, 5, 11);
    const Matrix p = softmax_rows(x);
    const Matrix g = softmax_rows_backward(p, up);
    const double h = 1e-3;
    for (std::size_t i = 0; i < x.size(); ++i) {
        Matrix xp = x, xm = x;
        xp.data()[i] += real(h);
        xm.data()[i] -= real(h);
        const Matrix pp = softmax_rows(xp), pm = softmax_rows(xm);
        double lp = 0, lm = 0;
        for (std::size_t j = 0; j < p.size(); ++j) {
            lp += static_cast<double>(pp.data()[j]) * up.data()[j];
            lm += static_cast<double>(pm.data()[j]) * up.data()[j];
        }
        const double num = (lp - lm) / (2 * h);
        CHECK(static_cast<double>(g.data()[i]) ==
              doctest::Approx(num).epsilon(5e-2).scale(1.0));
    }
}

TEST_CASE("rmsnorm matches its closed form and rejects bad gain shape") {
    const Matrix x = random_matrix(4, 8, 12);
    Matrix gain(1, 8);
    for (std::size_t j = 0; j < 8; ++j) gain(0, j) = real(0.5 + 0.1 * j);
    const real eps = real(1e-6);
    const Matrix y = rmsnorm(x, gain, eps);
    for (std::size_t i = 0; i < 4; ++i) {
        double ms = 0;
        for (std::size_t j = 0; j < 8; ++j) ms += static_cast<double>(x(i, j)) * x(i, j);
        const double rms = std::sqrt(ms / 8 + eps);
        for (std::size_t j = 0; j < 8; ++j)
            CHECK(y(i, j) == doctest::Approx(x(i, j) / rms * gain(0, j)).epsilon(1e-4));
    }
    CHECK_THROWS_AS(rmsnorm(x, Matrix(1, 7), eps), DimensionError);
}

TEST_CASE("rmsnorm backward matches finite differences for input and gain") {
    const Matrix x = random_matrix(3, 6, 13);
    Matrix gain(1, 6, real(1));
    const Matrix up = random_matrix(3, 6, 14);
    const real eps = real(1e-6);
    Matrix gain_grad(1, 6);
    const Matrix gx = rmsnorm_backward(x, gain, eps, up, gain_grad);

    auto objective = [&](const Matrix& xx, const Matrix& gg) {
        const Matrix y = rmsnorm(xx, gg, eps);
        double l = 0;
        for (std::size_t j = 0; j < y.size(); ++j)
            l += static_cast<double>(y.data()[j]) * up.data()[j];
        return l;
    };
    const double h = 1e-3;
    for (std::size_t i = 0; i < x.size(); ++i) {
        Matrix xp = x, xm = x;
        xp.data()[i] += real(h);
        xm.data()[i] -= real(h);
        const double num = (objective(xp, gain) - objective(xm, gain)) / (2 * h);
        CHECK(static_cast<double>(gx.data()[i]) ==
              doctest::Approx(num).epsilon(5e-2).scale(1.0));
    }
    for (std::size_t j = 0; j < 6; ++j) {
        Matrix gp = gain, gm = gain;
        gp(0, j) += real(h);
        gm(0, j) -= real(h);
        const double num = (objective(x, gp) - objective(x, gm)) / (2 * h);
        CHECK(static_cast<double>(gain_grad(0, j)) ==
              doctest::Approx(num).epsilon(5e-2).scale(1.0));
    }
}

TEST_CASE("add and scale in place") {
    Matrix a = random_matrix(2, 3, 15);
    const Matrix a0 = a;
    const Matrix b = random_matrix(2, 3, 16);
    add_inplace(a, b);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.data()[i] == doctest::Approx(a0.data()[i] + b.data()[i]));
    scale_inplace(a, real(2));
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.data()[i] == doctest::Approx(2 * (a0.data()[i] + b.data()[i])));
    CHECK_THROWS_AS(add_inplace(a, Matrix(3, 2)), DimensionError);
}
