#include "dagfit/linalg.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace dagfit {

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw TypeMismatch("matrix product shape mismatch (" + std::to_string(a.rows()) + "," +
                           std::to_string(a.cols()) + ")x(" + std::to_string(b.rows()) + "," +
                           std::to_string(b.cols()) + ")");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw TypeMismatch("matrix sum shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::fabs(v));
    return m;
}

Matrix symmetrized(const Matrix& a) {
    Matrix s(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
    return s;
}

namespace {

void check_square_symmetric(const Matrix& v) {
    if (v.rows() != v.cols())
        throw NotPositiveDefinite("matrix not square");
    const double scale = max_abs(v);
    for (std::size_t i = 0; i < v.rows(); ++i)
        for (std::size_t j = i + 1; j < v.cols(); ++j)
            if (std::fabs(v(i, j) - v(j, i)) > 1e-12 * scale)
                throw NotPositiveDefinite("matrix not symmetric within 1e-12 rel at (" +
                                          std::to_string(i) + "," + std::to_string(j) + ")");
}

double max_diag(const Matrix& v) {
    double m = 0.0;
    for (std::size_t i = 0; i < v.rows(); ++i) m = std::max(m, std::fabs(v(i, i)));
    return m;
}

} // namespace

Matrix cholesky_factor(const Matrix& v, double tol) {
    check_square_symmetric(v);
    const std::size_t n = v.rows();
    const double pivot_floor = tol * max_diag(v);
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = v(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d <= pivot_floor)
            throw NotPositiveDefinite("pivot " + std::to_string(d) + " at column " +
                                      std::to_string(j) + " below tolerance");
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = v(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

Matrix cholesky_psd(const Matrix& v, double tol) {
    if (v.rows() != v.cols()) throw NotPSD("matrix not square");
    const std::size_t n = v.rows();
    const double scale = max_diag(v);
    const double pivot_floor = tol * (scale > 0 ? scale : 1.0);
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = v(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d < -pivot_floor)
            throw NotPSD("negative pivot " + std::to_string(d) + " at column " +
                         std::to_string(j));
        if (d <= pivot_floor) {
            // semi-definite direction: zero row
            for (std::size_t i = j; i < n; ++i) l(i, j) = 0.0;
            continue;
        }
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = v(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b) {
    const std::size_t n = l.rows();
    if (b.size() != n) throw TypeMismatch("cholesky_solve: rhs length mismatch");
    std::vector<double> y(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
        x[ii] = s / l(ii, ii);
    }
    return x;
}

double quadratic_form(const Matrix& l, std::span<const double> x) {
    // x^T V^{-1} x = || L^{-1} x ||^2
    const std::size_t n = l.rows();
    if (x.size() != n) throw TypeMismatch("quadratic_form: vector length mismatch");
    double q = 0.0;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = x[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
        q += y[i] * y[i];
    }
    return q;
}

std::string to_csv(const Matrix& m) {
    std::string out;
    char cell[40];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            std::snprintf(cell, sizeof cell, "%.17g", m(i, j));
            if (j) out += ',';
            out += cell;
        }
        out += '\n';
    }
    return out;
}

Matrix cholesky_inverse(const Matrix& l) {
    const std::size_t n = l.rows();
    Matrix inv(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        std::vector<double> col = cholesky_solve(l, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
        e[j] = 0.0;
    }
    return symmetrized(inv);
}

} // namespace dagfit
