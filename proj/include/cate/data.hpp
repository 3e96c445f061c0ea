#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cate/linalg.hpp"

namespace cate {

// Covariates, binary treatment, observed outcome. Immutable after
// validate(); all producers in this library validate before returning.
struct ObservationalDataset {
    Matrix features;                        // n x d
    std::vector<int> treatment;             // 0/1, both arms present
    std::vector<double> outcome;            // length n
    std::vector<std::string> feature_names; // length d

    std::size_t n() const { return features.rows(); }
    std::size_t d() const { return features.cols(); }
    std::size_t treated_count() const;

    // Throws DataError on any invariant violation: mismatched lengths,
    // n < 2, treatment values outside {0,1}, an empty arm, non-finite
    // values, or feature-name count != d.
    void validate() const;
};

enum class Scenario { linear, null_effect, confounded, electricity };

const char* scenario_name(Scenario s);
std::optional<Scenario> parse_scenario(const std::string& name);

// Synthetic data-generating processes. The linear family draws X uniform
// on [0,1]^d with d = beta.size(); the electricity scenario has four fixed
// covariates (wind_speed, temperature, electricity_price, system_load) and
// a CO2-intensity outcome in g/kWh. Coefficient defaults are fixed
// constants; see generate() in data.cpp for the exact surfaces.
struct ScenarioSpec {
    Scenario kind = Scenario::electricity;
    std::size_t n = 5000;
    double noise_sd = 1.0;
    std::uint64_t seed = 42;
    double treated_fraction = 0.3; // randomized scenarios

    // linear / null_effect / confounded coefficients (d = beta.size())
    std::vector<double> beta = {1.0, -2.0, 0.5}; // baseline outcome slope
    std::vector<double> theta = {0.0, 0.0, 0.0}; // effect slope (null_effect forces 0)
    double tau_intercept = 2.0;                  // effect level (null_effect forces 0)

    // confounded assignment: P(W=1|X) = logistic(gamma_intercept + gamma.X)
    std::vector<double> gamma = {2.0, 2.0, 2.0};
    double gamma_intercept = -3.0;

    std::size_t dim() const { return kind == Scenario::electricity ? 4 : beta.size(); }
    void validate() const; // throws DataError
};

// Dataset plus the ground truth the DGP knows: both potential outcomes,
// the noiseless per-unit effect, and the true assignment probability.
struct SyntheticSample {
    ObservationalDataset dataset;
    std::vector<double> y0;
    std::vector<double> y1;
    std::vector<double> true_cate;
    std::vector<double> true_propensity;
};

// Deterministic in spec.seed; calling twice yields identical samples.
SyntheticSample generate(const ScenarioSpec& spec);

// Partition {0..n-1} into fold_count folds: a seeded uniform permutation
// chopped into contiguous blocks, sizes differing by at most one.
struct FoldAssignment {
    std::vector<std::size_t> fold_of; // length n, values in [0, fold_count)
    std::size_t fold_count = 0;

    std::vector<std::vector<std::size_t>> members() const;
    std::vector<std::size_t> complement(std::size_t fold) const;
};

FoldAssignment assign_folds(std::size_t n, std::size_t fold_count, std::uint64_t seed);

// CSV ingestion. Header row required, UTF-8, '.' decimal separator, no
// quoting. The named treatment/outcome columns are extracted; every other
// column becomes a feature, in header order.
ObservationalDataset load_csv(const std::string& path,
                              const std::string& treatment_col,
                              const std::string& outcome_col);

struct GroundTruth {
    std::vector<double> y0;
    std::vector<double> y1;
    std::vector<double> true_cate;
    std::vector<double> true_propensity;
};

void save_dataset_csv(const ObservationalDataset& data, const std::string& path,
                      const std::string& treatment_col = "treatment",
                      const std::string& outcome_col = "outcome");
void save_truth_csv(const SyntheticSample& sample, const std::string& path);
GroundTruth load_truth_csv(const std::string& path);

// Canonical shortest-round-trip text form used by every writer; identical
// doubles always serialize to identical bytes.
std::string format_double(double v);

} // namespace cate
