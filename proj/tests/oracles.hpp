#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "dagfit/linalg.hpp"

namespace oracle {

/// Composite Simpson on [a, b] with n (even) intervals; reference integrator
/// for the quadrature checks.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

/// Naive triple-loop matrix product.
inline dagfit::Matrix matmul(const dagfit::Matrix& a, const dagfit::Matrix& b) {
    dagfit::Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

/// Two-point interpolation formula evaluated directly per query.
inline double interp_two_point(std::span<const double> xk, std::span<const double> yk, double x) {
    if (x <= xk.front()) return yk.front();
    if (x >= xk.back()) return yk.back();
    std::size_t i = 0;
    while (xk[i + 1] < x) ++i;
    return yk[i] + (yk[i + 1] - yk[i]) * (x - xk[i]) / (xk[i + 1] - xk[i]);
}

/// Gauss-Jordan inverse; explicit-inverse oracle for the Cholesky solve path.
inline dagfit::Matrix invert(dagfit::Matrix a) {
    const std::size_t n = a.rows();
    dagfit::Matrix inv = dagfit::Matrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(a(r, col)) > std::fabs(a(pivot, col))) pivot = r;
        for (std::size_t c = 0; c < n; ++c) {
            std::swap(a(col, c), a(pivot, c));
            std::swap(inv(col, c), inv(pivot, c));
        }
        const double d = a(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            a(col, c) /= d;
            inv(col, c) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a(r, col);
            for (std::size_t c = 0; c < n; ++c) {
                a(r, c) -= f * a(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    return inv;
}

/// 5-point-stencil first derivative, one order beyond central differences.
inline double stencil5(const std::function<double(double)>& f, double x, double h) {
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h);
}

} // namespace oracle
