#include "tsmi/matrix.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>

#include "tsmi/errors.hpp"

namespace tsmi {
namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    std::ostringstream os;
    os << op << ": incompatible shapes (" << a.rows() << "," << a.cols() << ") and ("
       << b.rows() << "," << b.cols() << ")";
    throw DimensionError(os.str());
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<real> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("Matrix: value count does not match rows*cols");
    }
}

bool Matrix::all_finite() const {
    for (real v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Matrix matmul_serial(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    Matrix out(a.rows(), b.cols());
    const std::size_t k = a.cols(), n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const real* ar = a.row(i);
        real* orow = out.row(i);
        for (std::size_t p = 0; p < k; ++p) {
            const real av = ar[p];
            if (av == real(0)) continue;
            const real* br = b.row(p);
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * br[j];
        }
    }
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    Matrix out(a.rows(), b.cols());
    const std::size_t k = a.cols(), n = b.cols();
    const std::int64_t m = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        const real* ar = a.row(static_cast<std::size_t>(i));
        real* orow = out.row(static_cast<std::size_t>(i));
        for (std::size_t p = 0; p < k; ++p) {
            const real av = ar[p];
            if (av == real(0)) continue;
            const real* br = b.row(p);
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * br[j];
        }
    }
    return out;
}

Matrix matmul_nt_serial(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
    Matrix out(a.rows(), b.rows());
    const std::size_t k = a.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const real* ar = a.row(i);
        real* orow = out.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const real* br = b.row(j);
            real acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
            orow[j] = acc;
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
    Matrix out(a.rows(), b.rows());
    const std::size_t k = a.cols();
    const std::int64_t m = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        const real* ar = a.row(static_cast<std::size_t>(i));
        real* orow = out.row(static_cast<std::size_t>(i));
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const real* br = b.row(j);
            real acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
            orow[j] = acc;
        }
    }
    return out;
}

Matrix matmul_tn_serial(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
    Matrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t p = 0; p < a.rows(); ++p) {
        const real* ar = a.row(p);
        const real* br = b.row(p);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const real av = ar[i];
            if (av == real(0)) continue;
            real* orow = out.row(i);
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * br[j];
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
    Matrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    const std::int64_t m = static_cast<std::int64_t>(a.cols());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        real* orow = out.row(static_cast<std::size_t>(i));
        for (std::size_t p = 0; p < a.rows(); ++p) {
            const real av = a(p, static_cast<std::size_t>(i));
            if (av == real(0)) continue;
            const real* br = b.row(p);
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * br[j];
        }
    }
    return out;
}

Matrix softmax_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const real* in = m.row(i);
        real* o = out.row(i);
        real mx = in[0];
        for (std::size_t j = 1; j < m.cols(); ++j) mx = std::max(mx, in[j]);
        double sum = 0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double e = std::exp(static_cast<double>(in[j] - mx));
            o[j] = static_cast<real>(e);
            sum += e;
        }
        const real inv = static_cast<real>(1.0 / sum);
        for (std::size_t j = 0; j < m.cols(); ++j) o[j] *= inv;
    }
    return out;
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad) {
    if (!probs.same_shape(grad)) shape_error("softmax_rows_backward", probs, grad);
    Matrix out(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const real* p = probs.row(i);
        const real* g = grad.row(i);
        real* o = out.row(i);
        double dot = 0;
        for (std::size_t j = 0; j < probs.cols(); ++j) dot += static_cast<double>(p[j]) * g[j];
        for (std::size_t j = 0; j < probs.cols(); ++j)
            o[j] = p[j] * (g[j] - static_cast<real>(dot));
    }
    return out;
}

Matrix rmsnorm(const Matrix& x, const Matrix& gain, real eps) {
    if (gain.size() != x.cols()) shape_error("rmsnorm", x, gain);
    Matrix out(x.rows(), x.cols());
    const real* g = gain.data();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const real* in = x.row(i);
        real* o = out.row(i);
        double ms = 0;
        for (std::size_t j = 0; j < x.cols(); ++j) ms += static_cast<double>(in[j]) * in[j];
        ms = ms / static_cast<double>(x.cols()) + eps;
        const real inv = static_cast<real>(1.0 / std::sqrt(ms));
        for (std::size_t j = 0; j < x.cols(); ++j) o[j] = in[j] * inv * g[j];
    }
    return out;
}

Matrix rmsnorm_backward(const Matrix& x, const Matrix& gain, real eps,
                        const Matrix& grad, Matrix& gain_grad) {
    if (gain.size() != x.cols() || !x.same_shape(grad) || gain_grad.size() != gain.size())
        shape_error("rmsnorm_backward", x, grad);
    Matrix out(x.rows(), x.cols());
    const real* g = gain.data();
    real* gg = gain_grad.data();
    const std::size_t d = x.cols();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const real* in = x.row(i);
        const real* dy = grad.row(i);
        real* o = out.row(i);
        double ms = 0;
        for (std::size_t j = 0; j < d; ++j) ms += static_cast<double>(in[j]) * in[j];
        ms = ms / static_cast<double>(d) + eps;
        const double r = std::sqrt(ms);
        const double inv = 1.0 / r;
        double dot = 0;  // sum_j dy_j * g_j * x_j
        for (std::size_t j = 0; j < d; ++j)
            dot += static_cast<double>(dy[j]) * g[j] * in[j];
        const double c = dot / (static_cast<double>(d) * r * r * r);
        for (std::size_t j = 0; j < d; ++j) {
            o[j] = static_cast<real>(static_cast<double>(dy[j]) * g[j] * inv -
                                     static_cast<double>(in[j]) * c);
            gg[j] += static_cast<real>(static_cast<double>(dy[j]) * in[j] * inv);
        }
    }
    return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_error("add_inplace", a, b);
    real* ad = a.data();
    const real* bd = b.data();
    for (std::size_t i = 0; i < a.size(); ++i) ad[i] += bd[i];
}

void scale_inplace(Matrix& a, real s) {
    real* ad = a.data();
    for (std::size_t i = 0; i < a.size(); ++i) ad[i] *= s;
}

}  // namespace tsmi
