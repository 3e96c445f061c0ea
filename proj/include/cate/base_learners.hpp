#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cate/linalg.hpp"

namespace cate {

enum class RegressorKind { ols, ridge, knn, boosted_stumps };

const char* regressor_kind_name(RegressorKind k);

struct RegressorSpec {
    RegressorKind kind = RegressorKind::ols;
    double ridge_lambda = 1.0;        // ridge only, >= 0
    std::size_t knn_k = 5;            // knn only, >= 1
    std::size_t boost_rounds = 200;   // boosted_stumps only
    double boost_learning_rate = 0.1; // in (0, 1]
    std::uint64_t seed = 0;

    static RegressorSpec ols();
    static RegressorSpec ridge(double lambda);
    static RegressorSpec knn(std::size_t k);
    static RegressorSpec boosted_stumps(std::size_t rounds = 200, double learning_rate = 0.1);

    void validate() const;
};

struct LinearModel {
    double intercept = 0.0;
    std::vector<double> coef;
};

struct Stump {
    std::size_t feature = 0;
    double threshold = 0.0;
    double left = 0.0;  // x[feature] <= threshold
    double right = 0.0;
};

// Fitted regression model; immutable, safely shareable across threads.
class FittedRegressor {
  public:
    std::size_t input_dim() const { return dim_; }
    RegressorKind kind() const { return kind_; }

    std::vector<double> predict(const Matrix& x) const;
    double predict_one(std::span<const double> x) const;

    // Inspection for linear kinds; throws EstimationError otherwise.
    const LinearModel& linear() const;

  private:
    friend FittedRegressor fit_regressor(const RegressorSpec&, const Matrix&,
                                         std::span<const double>, std::span<const double>);

    struct KnnModel {
        Matrix points;
        std::vector<double> targets;
        std::vector<double> weights; // empty = unweighted
        std::size_t k = 1;
    };
    struct BoostModel {
        double base = 0.0;
        double learning_rate = 0.1;
        std::vector<Stump> stumps;
    };

    RegressorKind kind_ = RegressorKind::ols;
    std::size_t dim_ = 0;
    std::variant<LinearModel, KnnModel, BoostModel> model_;
};

// Least-squares family solved by normal equations (ridge jitter fallback
// on singular designs); knn averages the k nearest by Euclidean distance
// with ties broken by lowest row index; boosted_stumps is gradient
// boosting on squared loss with depth-1 trees.
FittedRegressor fit_regressor(const RegressorSpec& spec, const Matrix& x,
                              std::span<const double> y,
                              std::span<const double> weights = {});

enum class ClassifierKind { logistic };

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::logistic;
    double lambda = 0.0;       // L2 on non-intercept coefficients, mean-loss scale
    std::size_t max_iter = 100;
    double tol = 1e-10;
    double clip = 0.01;        // epsilon_clip in (0, 0.5)

    void validate() const;
};

// Fitted probability model for P(W=1|X). Predictions are clipped into
// [clip, 1-clip]; a non-convergent fit is usable but flagged.
class FittedClassifier {
  public:
    std::size_t input_dim() const { return dim_; }
    double clip() const { return clip_; }
    bool converged() const { return converged_; }
    std::size_t iterations() const { return iterations_; }
    const std::string& status() const { return status_; }

    std::vector<double> predict_proba(const Matrix& x) const;
    double predict_one(std::span<const double> x) const;

    const LinearModel& linear() const;
    bool is_constant() const { return constant_.has_value(); }

    // Known-constant propensity, for randomized designs and oracle tests.
    static FittedClassifier constant(double p, std::size_t dim, double clip = 0.01);

  private:
    friend FittedClassifier fit_classifier(const ClassifierSpec&, const Matrix&,
                                           std::span<const int>);

    std::size_t dim_ = 0;
    double clip_ = 0.01;
    bool converged_ = true;
    std::size_t iterations_ = 0;
    std::string status_;
    LinearModel model_;
    std::optional<double> constant_;
};

// Logistic regression by damped Newton iterations on the mean negative
// log-likelihood. Throws EstimationError when only one class is present;
// hitting max_iter is recorded on the model, not thrown.
FittedClassifier fit_classifier(const ClassifierSpec& spec, const Matrix& x,
                                std::span<const int> w);

} // namespace cate
