#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace cate {

// Dense row-major matrix. Small helper sized for design matrices with a
// handful of columns; no view machinery, copies are cheap enough here.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {values_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }

    std::span<const double> data() const { return values_; }

    // New matrix holding the listed rows, in the given order.
    Matrix select_rows(std::span<const std::size_t> indices) const;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

bool all_finite(std::span<const double> values);
bool all_finite(const Matrix& m);

double dot(std::span<const double> a, std::span<const double> b);
double mean(std::span<const double> values);
// Divide-by-n convention throughout.
double population_variance(std::span<const double> values);

// Solves A x = b for symmetric positive definite A via Cholesky.
// Singular/indefinite systems are retried with an escalating ridge jitter
// starting at 1e-10 (collinear designs should degrade, not fail); throws
// EstimationError if that still does not produce a finite solution.
std::vector<double> solve_spd(Matrix a, std::vector<double> b);

} // namespace cate
