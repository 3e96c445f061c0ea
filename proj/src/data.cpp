#include "cate/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cate/errors.hpp"
#include "cate/rng.hpp"

namespace cate {

std::size_t ObservationalDataset::treated_count() const {
    std::size_t c = 0;
    for (int w : treatment) c += (w == 1);
    return c;
}

void ObservationalDataset::validate() const {
    const std::size_t count = n();
    if (count < 2) throw DataError("dataset needs at least 2 rows, got " + std::to_string(count));
    if (treatment.size() != count || outcome.size() != count)
        throw DataError("treatment/outcome length does not match feature row count");
    if (feature_names.size() != d())
        throw DataError("feature name count does not match feature column count");
    for (int w : treatment)
        if (w != 0 && w != 1) throw DataError("treatment value outside {0,1}");
    const std::size_t treated = treated_count();
    if (treated == 0) throw DataError("treatment arm empty: no treated rows");
    if (treated == count) throw DataError("treatment arm empty: no control rows");
    if (!all_finite(features) || !all_finite(outcome))
        throw DataError("dataset contains non-finite values");
}

const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::linear: return "linear";
        case Scenario::null_effect: return "null_effect";
        case Scenario::confounded: return "confounded";
        case Scenario::electricity: return "electricity";
    }
    return "?";
}

std::optional<Scenario> parse_scenario(const std::string& name) {
    if (name == "linear") return Scenario::linear;
    if (name == "null_effect") return Scenario::null_effect;
    if (name == "confounded") return Scenario::confounded;
    if (name == "electricity") return Scenario::electricity;
    return std::nullopt;
}

void ScenarioSpec::validate() const {
    if (n < 2) throw DataError("scenario n must be >= 2");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
        throw DataError("noise_sd must be a finite nonnegative real");
    if (!(treated_fraction > 0.0) || !(treated_fraction < 1.0))
        throw DataError("treated_fraction must lie strictly inside (0,1)");
    if (kind != Scenario::electricity) {
        if (beta.empty()) throw DataError("scenario needs at least one covariate coefficient");
        if (theta.size() != beta.size())
            throw DataError("theta dimension must match beta");
        if (kind == Scenario::confounded && gamma.size() != beta.size())
            throw DataError("gamma dimension must match beta");
        if (!all_finite(beta) || !all_finite(theta) || !all_finite(gamma) ||
            !std::isfinite(tau_intercept) || !std::isfinite(gamma_intercept))
            throw DataError("scenario coefficients must be finite");
    }
}

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Electricity scenario constants. Covariates are drawn independently on
// plausible ranges; the outcome is a CO2 intensity in g/kWh that falls
// with wind generation and rises with system load, price and warm weather.
// The effect surface is heterogeneous in system_load and temperature with
// a level of +1.3 g/kWh on average.
struct ElectricityDgp {
    static constexpr double wind_lo = 0.0, wind_hi = 25.0;       // m/s
    static constexpr double temp_lo = -5.0, temp_hi = 30.0;      // deg C
    static constexpr double price_lo = 20.0, price_hi = 120.0;   // EUR/MWh
    static constexpr double load_lo = 2000.0, load_hi = 6000.0;  // MW

    static double baseline(std::span<const double> x) {
        const double wind = x[0], temp = x[1], price = x[2], load = x[3];
        return 420.0 - 5.5 * wind + 0.9 * (temp - 12.5) + 0.25 * (price - 70.0) +
               0.035 * (load - 4000.0);
    }
    static double effect(std::span<const double> x) {
        const double temp = x[1], load = x[3];
        return 1.3 + 0.9 * (load - 4000.0) / 2000.0 + 0.6 * (temp - 12.5) / 17.5;
    }
};

} // namespace

SyntheticSample generate(const ScenarioSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    const std::size_t n = spec.n;
    const std::size_t d = spec.dim();
    const bool electricity = spec.kind == Scenario::electricity;

    Matrix x(n, d);
    if (electricity) {
        for (std::size_t i = 0; i < n; ++i) {
            x(i, 0) = rng.uniform(ElectricityDgp::wind_lo, ElectricityDgp::wind_hi);
            x(i, 1) = rng.uniform(ElectricityDgp::temp_lo, ElectricityDgp::temp_hi);
            x(i, 2) = rng.uniform(ElectricityDgp::price_lo, ElectricityDgp::price_hi);
            x(i, 3) = rng.uniform(ElectricityDgp::load_lo, ElectricityDgp::load_hi);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) x(i, j) = rng.uniform01();
    }

    std::vector<double> base(n), tau(n), propensity(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = x.row(i);
        if (electricity) {
            base[i] = ElectricityDgp::baseline(row);
            tau[i] = ElectricityDgp::effect(row);
        } else {
            base[i] = dot(spec.beta, row);
            tau[i] = (spec.kind == Scenario::null_effect)
                         ? 0.0
                         : spec.tau_intercept + dot(spec.theta, row);
        }
        propensity[i] = (spec.kind == Scenario::confounded)
                            ? logistic(spec.gamma_intercept + dot(spec.gamma, row))
                            : spec.treated_fraction;
    }

    std::vector<int> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = rng.bernoulli(propensity[i]) ? 1 : 0;

    std::vector<double> eps0(n, 0.0), eps1(n, 0.0);
    if (spec.noise_sd > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            eps0[i] = rng.normal(0.0, spec.noise_sd);
            eps1[i] = rng.normal(0.0, spec.noise_sd);
        }
    }

    // A Bernoulli draw can leave an arm empty at tiny n; flip the first
    // unit so the dataset invariant holds.
    const std::size_t treated = static_cast<std::size_t>(std::count(w.begin(), w.end(), 1));
    if (treated == 0) w[0] = 1;
    if (treated == n) w[0] = 0;

    SyntheticSample sample;
    sample.y0.resize(n);
    sample.y1.resize(n);
    sample.true_cate = tau;
    sample.true_propensity = propensity;

    std::vector<double> outcome(n);
    for (std::size_t i = 0; i < n; ++i) {
        sample.y0[i] = base[i] + eps0[i];
        sample.y1[i] = base[i] + tau[i] + eps1[i];
        outcome[i] = w[i] == 1 ? sample.y1[i] : sample.y0[i];
    }

    std::vector<std::string> names;
    if (electricity) {
        names = {"wind_speed", "temperature", "electricity_price", "system_load"};
    } else {
        for (std::size_t j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
    }

    sample.dataset = {std::move(x), std::move(w), std::move(outcome), std::move(names)};
    sample.dataset.validate();
    return sample;
}

std::vector<std::vector<std::size_t>> FoldAssignment::members() const {
    std::vector<std::vector<std::size_t>> out(fold_count);
    for (std::size_t i = 0; i < fold_of.size(); ++i) out[fold_of[i]].push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::complement(std::size_t fold) const {
    std::vector<std::size_t> out;
    out.reserve(fold_of.size());
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold) out.push_back(i);
    return out;
}

FoldAssignment assign_folds(std::size_t n, std::size_t fold_count, std::uint64_t seed) {
    if (fold_count < 2)
        throw DataError("fold count Q=" + std::to_string(fold_count) + " is invalid: Q >= 2 required");
    if (fold_count > n)
        throw DataError("fold count Q=" + std::to_string(fold_count) + " > n=" + std::to_string(n) +
                        " is invalid");

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) { // Fisher-Yates
        const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(perm[i], perm[j]);
    }

    FoldAssignment fa;
    fa.fold_count = fold_count;
    fa.fold_of.resize(n);
    const std::size_t base = n / fold_count;
    const std::size_t remainder = n % fold_count;
    std::size_t pos = 0;
    for (std::size_t q = 0; q < fold_count; ++q) {
        const std::size_t size = base + (q < remainder ? 1 : 0);
        for (std::size_t k = 0; k < size; ++k) fa.fold_of[perm[pos++]] = q;
    }
    return fa;
}

// ---------------------------------------------------------------- CSV --

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    fields.push_back(field);
    return fields;
}

double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    double value = 0.0;
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end)
        throw DataError("line " + std::to_string(line_no) + ", column '" + column +
                        "': cannot parse '" + cell + "' as a number");
    if (!std::isfinite(value))
        throw DataError("line " + std::to_string(line_no) + ", column '" + column +
                        "': non-finite value '" + cell + "'");
    return value;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return lines;
}

} // namespace

ObservationalDataset load_csv(const std::string& path, const std::string& treatment_col,
                              const std::string& outcome_col) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw DataError("empty file: " + path);

    const auto header = split_csv_line(lines[0]);
    auto column_of = [&](const std::string& name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw DataError("missing column '" + name + "' in " + path);
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t w_col = column_of(treatment_col);
    const std::size_t y_col = column_of(outcome_col);
    if (w_col == y_col) throw DataError("treatment and outcome must be distinct columns");

    std::vector<std::size_t> feature_cols;
    std::vector<std::string> feature_names;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == w_col || c == y_col) continue;
        feature_cols.push_back(c);
        feature_names.push_back(header[c]);
    }

    const std::size_t n = lines.size() - 1;
    Matrix features(n, feature_cols.size());
    std::vector<int> treatment(n);
    std::vector<double> outcome(n);

    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t line_no = r + 2; // header is line 1
        const auto fields = split_csv_line(lines[r + 1]);
        if (fields.size() != header.size())
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " +
                            std::to_string(fields.size()));
        const double w = parse_cell(fields[w_col], line_no, treatment_col);
        if (w != 0.0 && w != 1.0)
            throw DataError("line " + std::to_string(line_no) + ": treatment value '" +
                            fields[w_col] + "' outside {0,1}");
        treatment[r] = static_cast<int>(w);
        outcome[r] = parse_cell(fields[y_col], line_no, outcome_col);
        for (std::size_t j = 0; j < feature_cols.size(); ++j)
            features(r, j) = parse_cell(fields[feature_cols[j]], line_no, feature_names[j]);
    }

    ObservationalDataset data{std::move(features), std::move(treatment), std::move(outcome),
                              std::move(feature_names)};
    data.validate();
    return data;
}

void save_dataset_csv(const ObservationalDataset& data, const std::string& path,
                      const std::string& treatment_col, const std::string& outcome_col) {
    std::ostringstream out;
    for (const auto& name : data.feature_names) out << name << ',';
    out << treatment_col << ',' << outcome_col << '\n';
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (std::size_t j = 0; j < data.d(); ++j) out << format_double(data.features(i, j)) << ',';
        out << data.treatment[i] << ',' << format_double(data.outcome[i]) << '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot write file: " + path);
    file << out.str();
    if (!file) throw DataError("write failed: " + path);
}

void save_truth_csv(const SyntheticSample& sample, const std::string& path) {
    std::ostringstream out;
    out << "y0,y1,true_cate,true_propensity\n";
    for (std::size_t i = 0; i < sample.dataset.n(); ++i) {
        out << format_double(sample.y0[i]) << ',' << format_double(sample.y1[i]) << ','
            << format_double(sample.true_cate[i]) << ','
            << format_double(sample.true_propensity[i]) << '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw DataError("cannot write file: " + path);
    file << out.str();
    if (!file) throw DataError("write failed: " + path);
}

GroundTruth load_truth_csv(const std::string& path) {
    const auto lines = read_lines(path);
    if (lines.empty()) throw DataError("empty file: " + path);
    const auto header = split_csv_line(lines[0]);
    const std::vector<std::string> wanted = {"y0", "y1", "true_cate", "true_propensity"};
    std::vector<std::size_t> cols;
    for (const auto& name : wanted) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("missing column '" + name + "' in " + path);
        cols.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    GroundTruth truth;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split_csv_line(lines[r]);
        if (fields.size() != header.size())
            throw DataError("line " + std::to_string(r + 1) + ": field count mismatch in " + path);
        truth.y0.push_back(parse_cell(fields[cols[0]], r + 1, wanted[0]));
        truth.y1.push_back(parse_cell(fields[cols[1]], r + 1, wanted[1]));
        truth.true_cate.push_back(parse_cell(fields[cols[2]], r + 1, wanted[2]));
        truth.true_propensity.push_back(parse_cell(fields[cols[3]], r + 1, wanted[3]));
    }
    return truth;
}

} // namespace cate
