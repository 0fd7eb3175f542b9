#include "pairvoice/matrix.hpp"

#include <string>

namespace pairvoice {

namespace {

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
    if (!ok) {
        throw ShapeError(std::string(op) + ": incompatible shapes (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + ") and (" + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
    }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "matmul", a, b);
    Matrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* ci = c.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* bk = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "matmul_at_b", a, b);
    Matrix c(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* ak = a.row(k).data();
        const double* bk = b.row(k).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            double* ci = c.row(i).data();
            for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "matmul_a_bt", a, b);
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* ai = a.row(i).data();
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* bj = b.row(j).data();
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

void add_inplace(Matrix& out, const Matrix& a) {
    require(out.same_shape(a), "add_inplace", out, a);
    auto o = out.flat();
    auto s = a.flat();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += s[i];
}

}  // namespace pairvoice
