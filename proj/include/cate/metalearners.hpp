#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "cate/base_learners.hpp"
#include "cate/data.hpp"
#include "cate/linalg.hpp"

namespace cate {

enum class LearnerKind { s, t, x, r };

const char* learner_kind_name(LearnerKind k);
std::optional<LearnerKind> parse_learner_kind(const std::string& name);

// Weight rule g for the X-learner's combination step: either the fitted
// propensity e(x) or a fixed constant in [0,1].
enum class GMode { propensity, fixed };

struct XLearnerWeights {
    GMode mode = GMode::propensity;
    double fixed_value = 0.5;
    ClassifierSpec propensity;
};

enum class TauModelKind { linear_wls, pseudo_outcome };

struct RLearnerConfig {
    std::size_t fold_count = 5; // Q
    double lambda = 1e-3;       // ridge penalty on the tau model, all coefficients
    TauModelKind tau_model = TauModelKind::linear_wls;
    RegressorSpec tau_spec = RegressorSpec::ols(); // pseudo_outcome backend
    RegressorSpec outcome = RegressorSpec::ols();
    ClassifierSpec propensity;
    std::optional<double> forced_propensity; // known-constant override in (0,1)
    std::uint64_t seed = 0;

    void validate() const;
};

// Cross-fitted nuisances: per-fold outcome and propensity models, each fit
// on every row outside its fold, plus the cached out-of-fold predictions.
// The outcome model is fit on the augmented design [X | W]; the conditional
// mean is assembled as m(x) = (1-e(x))*mu(x,0) + e(x)*mu(x,1).
struct NuisanceEstimates {
    FoldAssignment folds;
    std::vector<FittedRegressor> outcome_models;     // index = fold left out
    std::vector<FittedClassifier> propensity_models; // empty when forced
    std::optional<double> forced_propensity;
    std::vector<double> m_hat; // out-of-fold conditional mean, per unit
    std::vector<double> e_hat; // out-of-fold propensity, clipped, per unit
};

// Builds the cross-fitted nuisances. If a fold's training complement holds
// a single treatment arm the fit retries once with a re-seeded fold
// assignment, then errors.
NuisanceEstimates fit_nuisances(const ObservationalDataset& data, const RLearnerConfig& config);

namespace detail {

struct SParts {
    FittedRegressor joint; // fit on [X | scale*W]
    double treatment_scale = 1.0;
};
struct TParts {
    FittedRegressor mu0;
    FittedRegressor mu1;
};
struct XParts {
    FittedRegressor mu0;
    FittedRegressor mu1;
    FittedRegressor tau0; // fit on control imputed effects
    FittedRegressor tau1; // fit on treated imputed effects
    GMode g_mode = GMode::propensity;
    double g_fixed = 0.5;
    std::optional<FittedClassifier> g_model;
    std::vector<double> d1; // retained imputed effects, treated rows
    std::vector<double> d0; // retained imputed effects, control rows
};
struct RParts {
    TauModelKind tau_model = TauModelKind::linear_wls;
    std::vector<double> theta; // linear_wls: [intercept, slopes]
    std::optional<FittedRegressor> tau_regressor;
    NuisanceEstimates nuisances;
};

} // namespace detail

// A fitted metalearner. predict_cate is pure and deterministic; all
// sub-models are retained for inspection.
class FittedCateModel {
  public:
    LearnerKind kind() const { return kind_; }
    std::size_t input_dim() const { return dim_; }

    std::vector<double> predict_cate(const Matrix& x) const;

    // --- inspection -------------------------------------------------
    const FittedRegressor& joint() const;           // S
    const FittedRegressor& mu0() const;             // T, X
    const FittedRegressor& mu1() const;             // T, X
    const FittedRegressor& tau0() const;            // X
    const FittedRegressor& tau1() const;            // X
    std::span<const double> imputed_treated() const;  // X: D1 over treated rows
    std::span<const double> imputed_control() const;  // X: D0 over control rows
    std::vector<double> g_at(const Matrix& x) const;  // X: weight g(x) in [0,1]
    std::span<const double> r_theta() const;        // R, linear_wls: [intercept, slopes]
    const NuisanceEstimates& nuisances() const;     // R

    // Fit diagnostics worth surfacing (a propensity fit that hit its
    // iteration cap); empty when everything converged.
    std::vector<std::string> warnings() const;

  private:
    friend FittedCateModel fit_s(const ObservationalDataset&, const RegressorSpec&, double);
    friend FittedCateModel fit_t(const ObservationalDataset&, const RegressorSpec&,
                                 const RegressorSpec&);
    friend FittedCateModel fit_x(const ObservationalDataset&, const RegressorSpec&,
                                 const RegressorSpec&, const RegressorSpec&,
                                 const RegressorSpec&, const XLearnerWeights&);
    friend FittedCateModel fit_r(const ObservationalDataset&, const RLearnerConfig&);

    LearnerKind kind_ = LearnerKind::s;
    std::size_t dim_ = 0;
    std::variant<detail::SParts, detail::TParts, detail::XParts, detail::RParts> parts_;
};

/// S-learner: one base fit on [X | W]; tau(x) = mu(x,1) - mu(x,0).
/// treatment_scale rescales the W column for distance-based bases.
FittedCateModel fit_s(const ObservationalDataset& data, const RegressorSpec& base,
                      double treatment_scale = 1.0);

/// T-learner: mu0 on control rows, mu1 on treated rows; tau = mu1 - mu0.
FittedCateModel fit_t(const ObservationalDataset& data, const RegressorSpec& base0,
                      const RegressorSpec& base1);

/// X-learner: per-arm response surfaces, imputed effects
/// D1 = Y1 - mu0(X1), D0 = mu1(X0) - Y0, second-stage fits tau1/tau0,
/// combined as tau(x) = g(x)*tau0(x) + (1-g(x))*tau1(x).
FittedCateModel fit_x(const ObservationalDataset& data, const RegressorSpec& base0,
                      const RegressorSpec& base1, const RegressorSpec& tau_base0,
                      const RegressorSpec& tau_base1, const XLearnerWeights& weights);

/// R-learner: cross-fitted nuisances, then minimization of the empirical
/// R-loss plus lambda*|theta|^2 over the configured tau model class.
FittedCateModel fit_r(const ObservationalDataset& data, const RLearnerConfig& config);

// Plug-in sample-mean effect over the given covariate rows.
double estimate_ate(const FittedCateModel& model, const Matrix& x);

// Difference of arm means; the biased baseline under confounding.
double naive_ate(const ObservationalDataset& data);

// Penalized empirical R-loss of a linear tau model theta = [intercept,
// slopes]: mean_i (y_i - m_i - (w_i - e_i) * theta.[1,x_i])^2 + lambda*|theta|^2.
double r_loss_linear(const NuisanceEstimates& nuisances, const ObservationalDataset& data,
                     std::span<const double> theta, double lambda);

} // namespace cate
