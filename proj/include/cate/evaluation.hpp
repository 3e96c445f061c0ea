#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cate/base_learners.hpp"
#include "cate/data.hpp"
#include "cate/metalearners.hpp"

namespace cate {

// Error metrics of an effect estimate against ground truth. "variance" is
// the dispersion of the estimates themselves; the variance of the error is
// kept separately so rmse^2 = bias^2 + error_variance holds exactly under
// the population (divide-by-n) convention.
struct CateMetrics {
    double rmse = 0.0;
    double mae = 0.0;
    double bias = 0.0; // signed mean error
    double abs_bias = 0.0;
    double variance = 0.0;       // population variance of tau_hat
    double error_variance = 0.0; // population variance of tau_hat - tau_true
};

CateMetrics cate_metrics(std::span<const double> tau_hat, std::span<const double> tau_true);

// Plug-in estimate of the semiparametric variance bound for the PATE:
// mean over units of sigma1^2/e + sigma0^2/(1-e) + (tau(x) - tau_bar)^2.
struct EfficiencyBoundReport {
    double v_pate = 0.0;
    double variance_term = 0.0;      // mean of the two sigma^2 ratios
    double heterogeneity_term = 0.0; // mean of (tau(x) - tau_bar)^2
    std::vector<double> contributions;
    std::optional<FittedRegressor> sigma0_model;
    std::optional<FittedRegressor> sigma1_model;
};

// Core plug-in over per-unit nuisance values; oracle tests supply exact
// sigma^2 / e / tau here. Propensities must lie strictly inside (0,1).
EfficiencyBoundReport efficiency_bound_from_values(std::span<const double> sigma0_sq,
                                                   std::span<const double> sigma1_sq,
                                                   std::span<const double> e,
                                                   std::span<const double> tau_hat);

// Full pipeline: per-arm response fits with variance_base, squared
// residuals regressed on X per arm (floored at 0), propensity from the
// supplied classifier, tau from the supplied model.
EfficiencyBoundReport efficiency_bound(const ObservationalDataset& data,
                                       const FittedCateModel& cate_model,
                                       const FittedClassifier& propensity,
                                       const RegressorSpec& variance_base);

struct Histogram {
    std::vector<double> edges;       // bins + 1 ascending edges
    std::vector<std::size_t> counts; // counts sum to the input length
};

// Default range is [min, max] of the data with the maximum included in the
// last bin; with an explicit range, out-of-range values land in the edge
// bins so counts still sum to n.
Histogram histogram(std::span<const double> values, std::size_t bins,
                    std::optional<std::pair<double, double>> range = {});

// One metalearner entry in a benchmark run.
struct LearnerConfig {
    std::string name;
    LearnerKind kind = LearnerKind::s;
    RegressorSpec base = RegressorSpec::ols(); // S joint fit; default for both arms
    std::optional<RegressorSpec> base1;        // treated-arm override (T, X)
    std::optional<RegressorSpec> tau_base0;    // X second stage, defaults to base
    std::optional<RegressorSpec> tau_base1;
    XLearnerWeights weights;        // X
    double s_treatment_scale = 1.0; // S
    RLearnerConfig r;               // R

    static LearnerConfig s_learner(const RegressorSpec& base);
    static LearnerConfig t_learner(const RegressorSpec& base);
    static LearnerConfig x_learner(const RegressorSpec& base);
    static LearnerConfig r_learner(const RegressorSpec& base);
};

// S, T, X, R with a shared base spec and default options.
std::vector<LearnerConfig> default_learner_set(const RegressorSpec& base);

FittedCateModel fit_learner(const ObservationalDataset& data, const LearnerConfig& config);

struct LearnerResult {
    std::string name;
    std::vector<std::optional<CateMetrics>> per_replication; // empty optional = failed
    std::vector<double> ate_per_replication;                 // NaN where failed
    std::vector<std::string> errors;                         // recorded fit failures
    CateMetrics mean_metrics; // mean over successful replications
    double mean_ate = 0.0;
    std::size_t ok_replications = 0;
    Histogram hist; // tau_hat of the final replication
};

struct BenchmarkReport {
    ScenarioSpec scenario;
    std::size_t replications = 0;
    std::uint64_t seed = 0;
    std::size_t hist_bins = 0;
    std::vector<LearnerResult> learners;
};

// Replication r draws the scenario with seed+r and fits every learner on
// that same sample; metrics are averaged across replications. Replications
// may run on `threads` workers; results are identical for any thread count.
BenchmarkReport benchmark(const ScenarioSpec& scenario,
                          const std::vector<LearnerConfig>& learners,
                          std::size_t replications, std::uint64_t seed,
                          std::size_t threads = 1, std::size_t hist_bins = 30);

// Key-value text with nested per-learner tables; byte-deterministic.
std::string report_to_text(const BenchmarkReport& report);
// One row per learner x replication.
std::string report_to_csv(const BenchmarkReport& report);

} // namespace cate
