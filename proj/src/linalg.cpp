#include "cate/linalg.hpp"

#include <cmath>

#include "cate/errors.hpp"

namespace cate {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != m.cols()) throw EstimationError("from_rows: ragged row lengths");
        std::size_t c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = row(indices[i]);
        for (std::size_t c = 0; c < cols_; ++c) out(i, c) = src[c];
    }
    return out;
}

bool all_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

bool all_finite(const Matrix& m) { return all_finite(m.data()); }

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double population_variance(std::span<const double> values) {
    if (values.empty()) return 0.0;
    const double m = mean(values);
    double s = 0.0;
    for (double v : values) s += (v - m) * (v - m);
    return s / static_cast<double>(values.size());
}

namespace {

// In-place lower Cholesky; returns false on a non-positive pivot.
bool cholesky(Matrix& a) {
    const std::size_t n = a.rows();
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= a(j, k) * a(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag)) return false;
        const double ljj = std::sqrt(diag);
        a(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
            a(i, j) = v / ljj;
        }
    }
    return true;
}

std::vector<double> back_substitute(const Matrix& l, std::vector<double> b) {
    const std::size_t n = l.rows();
    for (std::size_t i = 0; i < n; ++i) { // L z = b
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * b[k];
        b[i] = v / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) { // L^T x = z
        double v = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) v -= l(k, ii) * b[k];
        b[ii] = v / l(ii, ii);
    }
    return b;
}

} // namespace

std::vector<double> solve_spd(Matrix a, std::vector<double> b) {
    if (a.rows() != a.cols() || a.rows() != b.size())
        throw EstimationError("solve_spd: shape mismatch");
    if (a.rows() == 0) return {};

    double diag_scale = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) diag_scale += std::abs(a(i, i));
    diag_scale = std::max(1.0, diag_scale / static_cast<double>(a.rows()));

    double jitter = 0.0;
    for (int attempt = 0; attempt < 4; ++attempt) {
        Matrix work = a;
        if (jitter > 0.0)
            for (std::size_t i = 0; i < work.rows(); ++i) work(i, i) += jitter;
        if (cholesky(work)) {
            auto x = back_substitute(work, b);
            if (all_finite(x)) return x;
        }
        jitter = (jitter == 0.0) ? 1e-10 * diag_scale : jitter * 100.0;
    }
    throw EstimationError("solve_spd: singular system, jitter retries exhausted");
}

} // namespace cate
