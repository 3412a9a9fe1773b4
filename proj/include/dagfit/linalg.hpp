#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dagfit/errors.hpp"

namespace dagfit {

/// Dense row-major matrix of doubles. Small-problem workhorse; no view types.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    Matrix transposed() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);

/// max_ij |a_ij|
double max_abs(const Matrix& a);

/// (a + a^T)/2
Matrix symmetrized(const Matrix& a);

/// Strict Cholesky factorization of a symmetric positive definite matrix.
/// Returns lower-triangular L with V = L L^T. Throws NotPositiveDefinite when
/// a pivot is <= tol * max(diag) (tol = 1e-12) or the input is not symmetric
/// within 1e-12 relative.
Matrix cholesky_factor(const Matrix& v, double tol = 1e-12);

/// Positive-semi-definite Cholesky: zero pivots within tolerance are allowed
/// (their rows are zeroed); negative pivots beyond tolerance throw NotPSD.
Matrix cholesky_psd(const Matrix& v, double tol = 1e-12);

/// Solve L L^T x = b given the lower factor L.
std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b);

/// x^T V^{-1} x via the factor (solves, never forms the inverse).
double quadratic_form(const Matrix& l, std::span<const double> x);

/// Full inverse from the factor (column-by-column solves).
Matrix cholesky_inverse(const Matrix& l);

/// Comma-separated rows with full double precision (audit exports).
std::string to_csv(const Matrix& m);

} // namespace dagfit
