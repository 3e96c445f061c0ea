#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cate/base_learners.hpp"
#include "cate/errors.hpp"
#include "cate/rng.hpp"

using namespace cate;

namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(n, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
    return x;
}

double train_mse(const FittedRegressor& model, const Matrix& x, std::span<const double> y) {
    const auto pred = model.predict(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
    return s / static_cast<double>(y.size());
}

} // namespace

TEST_CASE("ols recovers an exact line") {
    const auto x = Matrix::from_rows({{1.0}, {2.0}, {3.0}});
    const std::vector<double> y = {2.0, 4.0, 6.0};
    const auto model = fit_regressor(RegressorSpec::ols(), x, y);
    const auto pred = model.predict(Matrix::from_rows({{4.0}}));
    CHECK(pred[0] == doctest::Approx(8.0).epsilon(1e-8));
}

TEST_CASE("knn with one training point predicts its label everywhere") {
    const auto x = Matrix::from_rows({{0.0}});
    const std::vector<double> y = {5.0};
    const auto model = fit_regressor(RegressorSpec::knn(1), x, y);
    CHECK(model.predict(Matrix::from_rows({{100.0}}))[0] == 5.0);
}

TEST_CASE("ridge at lambda zero matches ols") {
    const auto x = random_matrix(20, 3, 11);
    Rng rng(12);
    std::vector<double> y(20);
    for (auto& v : y) v = rng.normal(0.0, 1.0);

    const auto ols = fit_regressor(RegressorSpec::ols(), x, y);
    const auto ridge0 = fit_regressor(RegressorSpec::ridge(0.0), x, y);
    const auto probe = random_matrix(10, 3, 13);
    const auto pa = ols.predict(probe);
    const auto pb = ridge0.predict(probe);
    for (std::size_t i = 0; i < pa.size(); ++i)
        CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-8));
}

TEST_CASE("ols residuals are orthogonal to the design") {
    const std::size_t n = 30, d = 3;
    const auto x = random_matrix(n, d, 15);
    Rng rng(16);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = 0.5 + dot(std::vector<double>{1.0, -2.0, 0.3}, x.row(i)) + rng.normal(0.0, 1.0);

    const auto model = fit_regressor(RegressorSpec::ols(), x, y);
    const auto fitted = model.predict(x);
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - fitted[i];

    double with_ones = 0.0;
    for (double r : resid) with_ones += r;
    CHECK(std::abs(with_ones) < 1e-8);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += resid[i] * x(i, j);
        CHECK(std::abs(s) < 1e-8);
    }
}

TEST_CASE("ols is exact on noiseless affine data") {
    const std::size_t n = 50, d = 4;
    const auto x = random_matrix(n, d, 19);
    const std::vector<double> b = {0.3, -1.2, 2.0, 0.7};
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = 0.7 + dot(b, x.row(i));
    const auto model = fit_regressor(RegressorSpec::ols(), x, y);
    const auto pred = model.predict(x);
    for (std::size_t i = 0; i < n; ++i) CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-8));
}

TEST_CASE("predict is pure and handles empty input") {
    const auto x = random_matrix(10, 2, 23);
    std::vector<double> y(10, 1.0);
    const auto model = fit_regressor(RegressorSpec::ols(), x, y);

    CHECK(model.predict(Matrix(0, 2)).empty());
    const auto a = model.predict(x);
    const auto b = model.predict(x);
    CHECK(a == b);
    CHECK_THROWS_AS(model.predict(Matrix(3, 5)), EstimationError);
}

TEST_CASE("fit_regressor input validation") {
    CHECK_THROWS_AS(fit_regressor(RegressorSpec::ols(), Matrix(0, 2), std::vector<double>{}),
                    EstimationError);
    const auto x = Matrix::from_rows({{1.0}, {2.0}});
    CHECK_THROWS_AS(fit_regressor(RegressorSpec::ols(), x, std::vector<double>{1.0}),
                    EstimationError);
    CHECK_THROWS_AS(
        fit_regressor(RegressorSpec::ols(), x, std::vector<double>{1.0, std::nan("")}),
        EstimationError);
    CHECK_THROWS_AS(fit_regressor(RegressorSpec::knn(3), x, std::vector<double>{1.0, 2.0}),
                    EstimationError); // k > n
    CHECK_THROWS_AS(fit_regressor(RegressorSpec::ridge(-1.0), x, std::vector<double>{1.0, 2.0}),
                    EstimationError);
    CHECK_THROWS_AS(fit_regressor(RegressorSpec::boosted_stumps(0), x,
                                  std::vector<double>{1.0, 2.0}),
                    EstimationError);
}

TEST_CASE("ols degrades gracefully on a collinear design") {
    // Two identical columns: the normal equations are singular and the
    // jittered solve must still produce a finite, accurate fit.
    const std::size_t n = 30;
    Matrix x(n, 2);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(i) / n;
        x(i, 0) = v;
        x(i, 1) = v;
        y[i] = 1.0 + 3.0 * v;
    }
    const auto model = fit_regressor(RegressorSpec::ols(), x, y);
    const auto pred = model.predict(x);
    for (std::size_t i = 0; i < n; ++i) CHECK(pred[i] == doctest::Approx(y[i]).epsilon(1e-6));
}

TEST_CASE("ridge coefficient norm is non-increasing in lambda") {
    const auto x = random_matrix(40, 3, 29);
    Rng rng(30);
    std::vector<double> y(40);
    for (std::size_t i = 0; i < 40; ++i)
        y[i] = dot(std::vector<double>{2.0, -1.0, 0.5}, x.row(i)) + rng.normal(0.0, 0.5);

    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 0.1, 1.0, 10.0, 100.0}) {
        const auto model = fit_regressor(RegressorSpec::ridge(lambda), x, y);
        double norm = 0.0;
        for (double c : model.linear().coef) norm += c * c;
        CHECK(norm <= prev + 1e-12);
        prev = norm;
    }
}

TEST_CASE("knn interpolates training points, ties broken by lowest index") {
    const auto x = Matrix::from_rows({{1.0}, {1.0}, {2.0}});
    const std::vector<double> y = {4.0, 9.0, 6.0};
    const auto model = fit_regressor(RegressorSpec::knn(1), x, y);
    // Two training rows at x=1 tie; the lower index wins.
    CHECK(model.predict(Matrix::from_rows({{1.0}}))[0] == 4.0);
    CHECK(model.predict(Matrix::from_rows({{2.0}}))[0] == 6.0);
}

TEST_CASE("boosting training loss is non-increasing per round") {
    const std::size_t n = 100;
    const auto x = random_matrix(n, 2, 31);
    Rng rng(32);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = std::sin(3.0 * x(i, 0)) + 0.5 * x(i, 1) + rng.normal(0.0, 0.2);

    // The stump sequence is deterministic, so fitting with increasing
    // round counts yields nested models.
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t rounds : {1, 2, 5, 10, 20, 40, 80}) {
        const auto model = fit_regressor(RegressorSpec::boosted_stumps(rounds, 0.1), x, y);
        const double mse = train_mse(model, x, y);
        CHECK(mse <= prev + 1e-12);
        prev = mse;
    }
}

TEST_CASE("boosting handles constant features") {
    const auto x = Matrix::from_rows({{1.0}, {1.0}, {1.0}});
    const std::vector<double> y = {2.0, 4.0, 6.0};
    const auto model = fit_regressor(RegressorSpec::boosted_stumps(10, 0.5), x, y);
    CHECK(model.predict(Matrix::from_rows({{1.0}}))[0] == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("weighted ols equals row duplication") {
    const auto x = Matrix::from_rows({{0.0}, {1.0}, {2.0}});
    const std::vector<double> y = {1.0, 3.0, 2.0};
    const std::vector<double> w = {2.0, 1.0, 1.0};
    const auto weighted = fit_regressor(RegressorSpec::ols(), x, y, w);

    const auto x_dup = Matrix::from_rows({{0.0}, {0.0}, {1.0}, {2.0}});
    const std::vector<double> y_dup = {1.0, 1.0, 3.0, 2.0};
    const auto duplicated = fit_regressor(RegressorSpec::ols(), x_dup, y_dup);

    const auto probe = Matrix::from_rows({{0.5}, {1.5}});
    const auto pa = weighted.predict(probe);
    const auto pb = duplicated.predict(probe);
    for (std::size_t i = 0; i < pa.size(); ++i)
        CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-10));
}

// ------------------------------------------------------------ classifier

TEST_CASE("classifier is calibrated on randomized assignment") {
    const std::size_t n = 10000;
    const auto x = random_matrix(n, 2, 41);
    Rng rng(42);
    std::vector<int> w(n);
    double treated = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = rng.bernoulli(0.3) ? 1 : 0;
        treated += w[i];
    }
    const auto model = fit_classifier(ClassifierSpec{}, x, w);
    CHECK(model.converged());
    const double mp = mean(model.predict_proba(x));
    CHECK(std::abs(mp - 0.3) < 0.03);
    CHECK(std::abs(mp - treated / static_cast<double>(n)) < 1e-6);
}

TEST_CASE("separable data stays within the clip bounds") {
    const auto x = Matrix::from_rows({{-2.0}, {-1.0}, {1.0}, {2.0}});
    const std::vector<int> w = {0, 0, 1, 1};
    ClassifierSpec spec;
    spec.max_iter = 50;
    const auto model = fit_classifier(spec, x, w);
    const auto p = model.predict_proba(x);
    for (double v : p) {
        CHECK(v >= spec.clip);
        CHECK(v <= 1.0 - spec.clip);
        CHECK(v != 0.0);
        CHECK(v != 1.0);
    }
    CHECK_FALSE(model.status().empty());
}

TEST_CASE("duplicating every row leaves fitted probabilities unchanged") {
    const std::size_t n = 60;
    const auto x = random_matrix(n, 2, 47);
    Rng rng(48);
    std::vector<int> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = rng.bernoulli(0.4) ? 1 : 0;

    Matrix x2(2 * n, 2);
    std::vector<int> w2(2 * n);
    for (std::size_t rep = 0; rep < 2; ++rep)
        for (std::size_t i = 0; i < n; ++i) {
            x2(rep * n + i, 0) = x(i, 0);
            x2(rep * n + i, 1) = x(i, 1);
            w2[rep * n + i] = w[i];
        }

    for (double lambda : {0.0, 0.5}) {
        ClassifierSpec spec;
        spec.lambda = lambda;
        const auto a = fit_classifier(spec, x, w);
        const auto b = fit_classifier(spec, x2, w2);
        const auto pa = a.predict_proba(x);
        const auto pb = b.predict_proba(x);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-9));
    }
}

TEST_CASE("classifier rejects single-class input") {
    const auto x = random_matrix(10, 1, 51);
    const std::vector<int> w(10, 1);
    CHECK_THROWS_WITH_AS(fit_classifier(ClassifierSpec{}, x, w),
                         doctest::Contains("single-class"), EstimationError);
}

TEST_CASE("constant classifier clamps into the clip range") {
    const auto c = FittedClassifier::constant(0.5, 2);
    CHECK(c.predict_one(std::vector<double>{1.0, 2.0}) == 0.5);
    const auto extreme = FittedClassifier::constant(0.001, 2, 0.01);
    CHECK(extreme.predict_one(std::vector<double>{0.0, 0.0}) == 0.01);
    CHECK_THROWS_AS(FittedClassifier::constant(0.0, 2), EstimationError);
}
