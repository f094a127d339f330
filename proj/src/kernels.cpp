#include "anytime/kernels.hpp"

#include <stdexcept>
#include <string>

namespace anytime::kernels {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("kernel shape mismatch: ") + what);
}

void shape_out(Matrix& out, std::size_t rows, std::size_t cols) {
    if (out.rows() != rows || out.cols() != cols) out = Matrix(rows, cols);
}

}  // namespace

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    require(a.cols() == b.cols(), "matmul_nt inner dims");
    const std::size_t m = a.rows(), n = b.rows(), k = a.cols();
    shape_out(out, m, n);
    const auto work = m * n * k;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
    for (std::size_t i = 0; i < m; ++i) {
        const double* ar = a.row(i).data();
        double* orow = out.row(i).data();
        for (std::size_t j = 0; j < n; ++j) {
            const double* br = b.row(j).data();
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
            orow[j] = s;
        }
    }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    require(a.rows() == b.rows(), "matmul_tn outer dims");
    const std::size_t r = a.rows(), m = a.cols(), n = b.cols();
    shape_out(out, m, n);
    const auto work = m * n * r;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.row(i).data();
        for (std::size_t j = 0; j < n; ++j) orow[j] = 0.0;
        for (std::size_t q = 0; q < r; ++q) {
            const double aqi = a(q, i);
            if (aqi == 0.0) continue;
            const double* br = b.row(q).data();
            for (std::size_t j = 0; j < n; ++j) orow[j] += aqi * br[j];
        }
    }
}

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out) {
    require(a.cols() == b.rows(), "matmul_nn inner dims");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    shape_out(out, m, n);
    const auto work = m * n * k;
#pragma omp parallel for schedule(static) if (work > kParallelThreshold)
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.row(i).data();
        for (std::size_t j = 0; j < n; ++j) orow[j] = 0.0;
        const double* ar = a.row(i).data();
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ar[p];
            if (aip == 0.0) continue;
            const double* br = b.row(p).data();
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * br[j];
        }
    }
}

void add_row_bias(Matrix& m, std::span<const double> bias) {
    require(bias.size() == m.cols(), "bias length");
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
    }
}

void column_sums(const Matrix& m, std::span<double> out) {
    require(out.size() == m.cols(), "column_sums length");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
    }
}

namespace reference {

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    require(a.cols() == b.cols(), "matmul_nt inner dims");
    out = Matrix(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(j, p);
            out(i, j) = s;
        }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    require(a.rows() == b.rows(), "matmul_tn outer dims");
    out = Matrix(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t q = 0; q < a.rows(); ++q) s += a(q, i) * b(q, j);
            out(i, j) = s;
        }
}

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out) {
    require(a.cols() == b.rows(), "matmul_nn inner dims");
    out = Matrix(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
            out(i, j) = s;
        }
}

}  // namespace reference

}  // namespace anytime::kernels
