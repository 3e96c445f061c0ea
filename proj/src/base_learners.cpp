#include "cate/base_learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cate/errors.hpp"

namespace cate {

const char* regressor_kind_name(RegressorKind k) {
    switch (k) {
        case RegressorKind::ols: return "ols";
        case RegressorKind::ridge: return "ridge";
        case RegressorKind::knn: return "knn";
        case RegressorKind::boosted_stumps: return "boosted_stumps";
    }
    return "?";
}

RegressorSpec RegressorSpec::ols() { return RegressorSpec{}; }

RegressorSpec RegressorSpec::ridge(double lambda) {
    RegressorSpec s;
    s.kind = RegressorKind::ridge;
    s.ridge_lambda = lambda;
    return s;
}

RegressorSpec RegressorSpec::knn(std::size_t k) {
    RegressorSpec s;
    s.kind = RegressorKind::knn;
    s.knn_k = k;
    return s;
}

RegressorSpec RegressorSpec::boosted_stumps(std::size_t rounds, double learning_rate) {
    RegressorSpec s;
    s.kind = RegressorKind::boosted_stumps;
    s.boost_rounds = rounds;
    s.boost_learning_rate = learning_rate;
    return s;
}

void RegressorSpec::validate() const {
    if (kind == RegressorKind::ridge && !(ridge_lambda >= 0.0))
        throw EstimationError("ridge lambda must be >= 0");
    if (kind == RegressorKind::knn && knn_k < 1)
        throw EstimationError("knn neighbor count must be >= 1");
    if (kind == RegressorKind::boosted_stumps) {
        if (boost_rounds < 1) throw EstimationError("boosting rounds must be >= 1");
        if (!(boost_learning_rate > 0.0) || !(boost_learning_rate <= 1.0))
            throw EstimationError("boosting learning rate must lie in (0,1]");
    }
}

namespace {

void check_training_inputs(const Matrix& x, std::span<const double> y,
                           std::span<const double> weights) {
    if (x.rows() == 0) throw EstimationError("empty training input");
    if (y.size() != x.rows()) throw EstimationError("target length does not match row count");
    if (!all_finite(x) || !all_finite(y))
        throw EstimationError("non-finite values in training input");
    if (!weights.empty()) {
        if (weights.size() != x.rows())
            throw EstimationError("weight length does not match row count");
        for (double w : weights)
            if (!std::isfinite(w) || w < 0.0)
                throw EstimationError("weights must be finite and nonnegative");
    }
}

// Weighted normal equations on the intercept-augmented design; the
// intercept is never penalized.
LinearModel fit_linear(const Matrix& x, std::span<const double> y,
                       std::span<const double> weights, double lambda) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const std::size_t p = d + 1;

    Matrix gram(p, p);
    std::vector<double> rhs(p, 0.0);
    std::vector<double> z(p);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        if (w == 0.0) continue;
        z[0] = 1.0;
        const auto row = x.row(i);
        for (std::size_t j = 0; j < d; ++j) z[j + 1] = row[j];
        for (std::size_t a = 0; a < p; ++a) {
            rhs[a] += w * z[a] * y[i];
            for (std::size_t b = a; b < p; ++b) gram(a, b) += w * z[a] * z[b];
        }
    }
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < a; ++b) gram(a, b) = gram(b, a);
    for (std::size_t j = 1; j < p; ++j) gram(j, j) += lambda;

    const auto sol = solve_spd(std::move(gram), std::move(rhs));
    LinearModel m;
    m.intercept = sol[0];
    m.coef.assign(sol.begin() + 1, sol.end());
    return m;
}

double predict_linear(const LinearModel& m, std::span<const double> x) {
    return m.intercept + dot(m.coef, x);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

struct StumpSearchResult {
    bool found = false;
    Stump stump;
    double gain = 0.0;
};

} // namespace

const LinearModel& FittedRegressor::linear() const {
    if (const auto* m = std::get_if<LinearModel>(&model_)) return *m;
    throw EstimationError("not a linear model");
}

std::vector<double> FittedRegressor::predict(const Matrix& x) const {
    if (x.rows() > 0 && x.cols() != dim_)
        throw EstimationError("predict: input has " + std::to_string(x.cols()) +
                              " columns, model expects " + std::to_string(dim_));
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_one(x.row(i));
    return out;
}

double FittedRegressor::predict_one(std::span<const double> x) const {
    if (x.size() != dim_)
        throw EstimationError("predict: input has " + std::to_string(x.size()) +
                              " dimensions, model expects " + std::to_string(dim_));
    switch (kind_) {
        case RegressorKind::ols:
        case RegressorKind::ridge:
            return predict_linear(std::get<LinearModel>(model_), x);
        case RegressorKind::knn: {
            const auto& m = std::get<KnnModel>(model_);
            // (distance, index) pairs sorted lexicographically: lowest
            // index wins ties.
            std::vector<std::pair<double, std::size_t>> order(m.points.rows());
            for (std::size_t i = 0; i < m.points.rows(); ++i)
                order[i] = {squared_distance(m.points.row(i), x), i};
            std::sort(order.begin(), order.end());
            double num = 0.0, den = 0.0;
            for (std::size_t r = 0; r < m.k; ++r) {
                const std::size_t idx = order[r].second;
                const double w = m.weights.empty() ? 1.0 : m.weights[idx];
                num += w * m.targets[idx];
                den += w;
            }
            if (den == 0.0) { // all-zero weights in the neighborhood
                for (std::size_t r = 0; r < m.k; ++r) num += m.targets[order[r].second];
                return num / static_cast<double>(m.k);
            }
            return num / den;
        }
        case RegressorKind::boosted_stumps: {
            const auto& m = std::get<BoostModel>(model_);
            double value = m.base;
            for (const auto& s : m.stumps)
                value += m.learning_rate * (x[s.feature] <= s.threshold ? s.left : s.right);
            return value;
        }
    }
    throw EstimationError("unknown regressor kind");
}

namespace {

// Best single split of the residuals, maximizing the weighted SSE
// reduction. Features and thresholds are scanned in order and only a
// strictly larger gain replaces the incumbent, so the result is
// deterministic.
StumpSearchResult search_stump(const Matrix& x, std::span<const double> residual,
                               std::span<const double> weights,
                               const std::vector<std::vector<std::size_t>>& feature_order) {
    const std::size_t n = x.rows();
    StumpSearchResult best;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const auto& order = feature_order[j];
        double left_w = 0.0, left_s = 0.0;
        double total_w = 0.0, total_s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = weights.empty() ? 1.0 : weights[i];
            total_w += w;
            total_s += w * residual[i];
        }
        if (total_w == 0.0) continue;
        const double base_score = total_s * total_s / total_w;
        for (std::size_t pos = 0; pos + 1 < n; ++pos) {
            const std::size_t idx = order[pos];
            const double w = weights.empty() ? 1.0 : weights[idx];
            left_w += w;
            left_s += w * residual[idx];
            const double here = x(idx, j);
            const double next = x(order[pos + 1], j);
            if (here == next) continue; // no threshold between equal values
            const double right_w = total_w - left_w;
            const double right_s = total_s - left_s;
            if (left_w == 0.0 || right_w == 0.0) continue;
            const double gain =
                left_s * left_s / left_w + right_s * right_s / right_w - base_score;
            if (gain > best.gain) {
                best.found = true;
                best.gain = gain;
                best.stump.feature = j;
                best.stump.threshold = 0.5 * (here + next);
                best.stump.left = left_s / left_w;
                best.stump.right = right_s / right_w;
            }
        }
    }
    return best;
}

} // namespace

FittedRegressor fit_regressor(const RegressorSpec& spec, const Matrix& x,
                              std::span<const double> y, std::span<const double> weights) {
    spec.validate();
    check_training_inputs(x, y, weights);

    FittedRegressor model;
    model.kind_ = spec.kind;
    model.dim_ = x.cols();

    switch (spec.kind) {
        case RegressorKind::ols:
            model.model_ = fit_linear(x, y, weights, 0.0);
            break;
        case RegressorKind::ridge:
            model.model_ = fit_linear(x, y, weights, spec.ridge_lambda);
            break;
        case RegressorKind::knn: {
            if (spec.knn_k > x.rows())
                throw EstimationError("knn needs at least k=" + std::to_string(spec.knn_k) +
                                      " training rows, got " + std::to_string(x.rows()));
            FittedRegressor::KnnModel m;
            m.points = x;
            m.targets.assign(y.begin(), y.end());
            m.weights.assign(weights.begin(), weights.end());
            m.k = spec.knn_k;
            model.model_ = std::move(m);
            break;
        }
        case RegressorKind::boosted_stumps: {
            const std::size_t n = x.rows();
            std::vector<std::vector<std::size_t>> feature_order(x.cols());
            for (std::size_t j = 0; j < x.cols(); ++j) {
                auto& order = feature_order[j];
                order.resize(n);
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(),
                                 [&](std::size_t a, std::size_t b) { return x(a, j) < x(b, j); });
            }

            FittedRegressor::BoostModel m;
            m.learning_rate = spec.boost_learning_rate;
            double wsum = 0.0, ysum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double w = weights.empty() ? 1.0 : weights[i];
                wsum += w;
                ysum += w * y[i];
            }
            if (wsum == 0.0) throw EstimationError("boosted_stumps: total weight is zero");
            m.base = ysum / wsum;

            std::vector<double> residual(n);
            for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - m.base;

            m.stumps.reserve(spec.boost_rounds);
            for (std::size_t round = 0; round < spec.boost_rounds; ++round) {
                auto found = search_stump(x, residual, weights, feature_order);
                Stump stump;
                if (found.found) {
                    stump = found.stump;
                } else {
                    // No informative split left: shrink toward the
                    // weighted residual mean.
                    double s = 0.0;
                    for (std::size_t i = 0; i < n; ++i)
                        s += (weights.empty() ? 1.0 : weights[i]) * residual[i];
                    const double leaf = s / wsum;
                    stump = {0, std::numeric_limits<double>::infinity(), leaf, leaf};
                }
                for (std::size_t i = 0; i < n; ++i)
                    residual[i] -= m.learning_rate *
                                   (x(i, stump.feature) <= stump.threshold ? stump.left
                                                                           : stump.right);
                m.stumps.push_back(stump);
            }
            model.model_ = std::move(m);
            break;
        }
    }
    return model;
}

// ------------------------------------------------------------ classifier

void ClassifierSpec::validate() const {
    if (!(lambda >= 0.0)) throw EstimationError("classifier lambda must be >= 0");
    if (max_iter < 1) throw EstimationError("classifier max_iter must be >= 1");
    if (!(tol > 0.0)) throw EstimationError("classifier tolerance must be > 0");
    if (!(clip > 0.0) || !(clip < 0.5))
        throw EstimationError("clip bound must lie in (0, 0.5)");
}

namespace {

double stable_sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) { // log(1 + exp(z)), overflow-safe
    if (z > 35.0) return z;
    if (z < -35.0) return std::exp(z);
    return std::log1p(std::exp(z));
}

} // namespace

const LinearModel& FittedClassifier::linear() const {
    if (constant_) throw EstimationError("constant classifier has no linear model");
    return model_;
}

FittedClassifier FittedClassifier::constant(double p, std::size_t dim, double clip) {
    if (!(p > 0.0) || !(p < 1.0))
        throw EstimationError("constant propensity must lie strictly inside (0,1)");
    FittedClassifier c;
    c.dim_ = dim;
    c.clip_ = clip;
    c.constant_ = std::clamp(p, clip, 1.0 - clip);
    c.status_ = "constant";
    return c;
}

std::vector<double> FittedClassifier::predict_proba(const Matrix& x) const {
    if (x.rows() > 0 && x.cols() != dim_)
        throw EstimationError("predict_proba: input has " + std::to_string(x.cols()) +
                              " columns, model expects " + std::to_string(dim_));
    std::vector<double> out(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_one(x.row(i));
    return out;
}

double FittedClassifier::predict_one(std::span<const double> x) const {
    if (x.size() != dim_) throw EstimationError("predict_proba: dimension mismatch");
    if (constant_) return *constant_;
    const double p = stable_sigmoid(model_.intercept + dot(model_.coef, x));
    return std::clamp(p, clip_, 1.0 - clip_);
}

FittedClassifier fit_classifier(const ClassifierSpec& spec, const Matrix& x,
                                std::span<const int> w) {
    spec.validate();
    if (x.rows() == 0) throw EstimationError("empty training input");
    if (w.size() != x.rows()) throw EstimationError("label length does not match row count");
    if (!all_finite(x)) throw EstimationError("non-finite values in training input");

    std::size_t positives = 0;
    for (int v : w) {
        if (v != 0 && v != 1) throw EstimationError("classifier labels must be 0/1");
        positives += (v == 1);
    }
    if (positives == 0 || positives == w.size())
        throw EstimationError("single-class input: both treatment arms required");

    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const std::size_t p = d + 1;
    const double inv_n = 1.0 / static_cast<double>(n);

    // Mean NLL keeps the penalty scale invariant under row duplication.
    std::vector<double> beta(p, 0.0);
    auto objective = [&](const std::vector<double>& b) {
        double nll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double eta = b[0] + dot(std::span(b).subspan(1), x.row(i));
            nll += softplus(eta) - (w[i] == 1 ? eta : 0.0);
        }
        double pen = 0.0;
        for (std::size_t j = 1; j < p; ++j) pen += b[j] * b[j];
        return nll * inv_n + spec.lambda * pen;
    };

    FittedClassifier model;
    model.dim_ = d;
    model.clip_ = spec.clip;
    model.converged_ = false;

    double current = objective(beta);
    std::size_t iter = 0;
    std::vector<double> grad(p), prob(n);
    for (; iter < spec.max_iter; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        Matrix hess(p, p);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = x.row(i);
            const double eta = beta[0] + dot(std::span(beta).subspan(1), row);
            const double pi = stable_sigmoid(eta);
            prob[i] = pi;
            const double g = (pi - (w[i] == 1 ? 1.0 : 0.0)) * inv_n;
            const double s = pi * (1.0 - pi) * inv_n;
            grad[0] += g;
            hess(0, 0) += s;
            for (std::size_t a = 0; a < d; ++a) {
                grad[a + 1] += g * row[a];
                hess(0, a + 1) += s * row[a];
                for (std::size_t b = a; b < d; ++b) hess(a + 1, b + 1) += s * row[a] * row[b];
            }
        }
        for (std::size_t j = 1; j < p; ++j) {
            grad[j] += 2.0 * spec.lambda * beta[j];
            hess(j, j) += 2.0 * spec.lambda;
        }
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < a; ++b) hess(a, b) = hess(b, a);

        const auto step = solve_spd(std::move(hess), grad);

        // Damped update: halve until the objective stops increasing.
        double scale = 1.0;
        std::vector<double> candidate(p);
        double next = current;
        for (int halving = 0; halving < 40; ++halving) {
            for (std::size_t j = 0; j < p; ++j) candidate[j] = beta[j] - scale * step[j];
            next = objective(candidate);
            if (next <= current + 1e-15) break;
            scale *= 0.5;
        }

        double max_delta = 0.0;
        for (std::size_t j = 0; j < p; ++j)
            max_delta = std::max(max_delta, std::abs(scale * step[j]));
        beta = candidate;
        current = next;
        if (max_delta < spec.tol) {
            model.converged_ = true;
            ++iter;
            break;
        }
    }

    model.iterations_ = iter;
    model.model_.intercept = beta[0];
    model.model_.coef.assign(beta.begin() + 1, beta.end());
    model.status_ = model.converged_
                        ? "converged in " + std::to_string(iter) + " iterations"
                        : "did not converge within " + std::to_string(spec.max_iter) +
                              " iterations (separable data or tolerance too tight)";
    return model;
}

} // namespace cate
