#include "cate/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "cate/errors.hpp"

namespace cate {

CateMetrics cate_metrics(std::span<const double> tau_hat, std::span<const double> tau_true) {
    if (tau_hat.empty()) throw EstimationError("cate_metrics: empty input");
    if (tau_hat.size() != tau_true.size())
        throw EstimationError("cate_metrics: length mismatch");
    if (!all_finite(tau_hat) || !all_finite(tau_true))
        throw EstimationError("cate_metrics: non-finite values");

    const std::size_t n = tau_hat.size();
    std::vector<double> err(n);
    for (std::size_t i = 0; i < n; ++i) err[i] = tau_hat[i] - tau_true[i];

    CateMetrics m;
    double sq = 0.0, abs = 0.0;
    for (double e : err) {
        sq += e * e;
        abs += std::abs(e);
    }
    m.rmse = std::sqrt(sq / static_cast<double>(n));
    m.mae = abs / static_cast<double>(n);
    m.bias = mean(err);
    m.abs_bias = std::abs(m.bias);
    m.variance = population_variance(tau_hat);
    m.error_variance = population_variance(err);
    return m;
}

EfficiencyBoundReport efficiency_bound_from_values(std::span<const double> sigma0_sq,
                                                   std::span<const double> sigma1_sq,
                                                   std::span<const double> e,
                                                   std::span<const double> tau_hat) {
    const std::size_t n = tau_hat.size();
    if (n == 0) throw EstimationError("efficiency bound: empty input");
    if (sigma0_sq.size() != n || sigma1_sq.size() != n || e.size() != n)
        throw EstimationError("efficiency bound: length mismatch");
    for (double p : e)
        if (!(p > 0.0) || !(p < 1.0))
            throw EstimationError("efficiency bound: propensities must lie inside (0,1)");

    const double tau_bar = mean(tau_hat);
    EfficiencyBoundReport report;
    report.contributions.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s0 = std::max(0.0, sigma0_sq[i]);
        const double s1 = std::max(0.0, sigma1_sq[i]);
        const double spread = s1 / e[i] + s0 / (1.0 - e[i]);
        const double het = (tau_hat[i] - tau_bar) * (tau_hat[i] - tau_bar);
        report.contributions[i] = spread + het;
        report.variance_term += spread;
        report.heterogeneity_term += het;
    }
    report.variance_term /= static_cast<double>(n);
    report.heterogeneity_term /= static_cast<double>(n);
    report.v_pate = mean(report.contributions);
    return report;
}

EfficiencyBoundReport efficiency_bound(const ObservationalDataset& data,
                                       const FittedCateModel& cate_model,
                                       const FittedClassifier& propensity,
                                       const RegressorSpec& variance_base) {
    data.validate();

    std::vector<std::size_t> control, treated;
    for (std::size_t i = 0; i < data.n(); ++i)
        (data.treatment[i] == 1 ? treated : control).push_back(i);

    // Conditional variance per arm: squared residuals of a per-arm
    // response fit, regressed on X.
    auto fit_sigma_sq = [&](std::span<const std::size_t> idx) {
        const Matrix ax = data.features.select_rows(idx);
        std::vector<double> ay(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) ay[i] = data.outcome[idx[i]];
        const auto mu = fit_regressor(variance_base, ax, ay);
        const auto fitted = mu.predict(ax);
        std::vector<double> sq(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            sq[i] = (ay[i] - fitted[i]) * (ay[i] - fitted[i]);
        return fit_regressor(variance_base, ax, sq);
    };

    EfficiencyBoundReport report;
    report.sigma0_model = fit_sigma_sq(control);
    report.sigma1_model = fit_sigma_sq(treated);

    const auto sigma0_sq = report.sigma0_model->predict(data.features);
    const auto sigma1_sq = report.sigma1_model->predict(data.features);
    const auto e = propensity.predict_proba(data.features);
    const auto tau_hat = cate_model.predict_cate(data.features);

    auto core = efficiency_bound_from_values(sigma0_sq, sigma1_sq, e, tau_hat);
    core.sigma0_model = std::move(report.sigma0_model);
    core.sigma1_model = std::move(report.sigma1_model);
    return core;
}

Histogram histogram(std::span<const double> values, std::size_t bins,
                    std::optional<std::pair<double, double>> range) {
    if (bins < 1) throw EstimationError("histogram: bins must be >= 1");
    if (values.empty() && !range)
        throw EstimationError("histogram: empty input without an explicit range");

    double lo, hi;
    if (range) {
        lo = range->first;
        hi = range->second;
        if (!(lo <= hi)) throw EstimationError("histogram: invalid range");
    } else {
        lo = *std::min_element(values.begin(), values.end());
        hi = *std::max_element(values.begin(), values.end());
    }

    Histogram h;
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b)
        h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
    h.counts.assign(bins, 0);

    const double width = hi - lo;
    for (double v : values) {
        std::size_t b = 0;
        if (width > 0.0) {
            const double t = (v - lo) / width * static_cast<double>(bins);
            b = t < 0.0 ? 0 : static_cast<std::size_t>(t);
            if (b >= bins) b = bins - 1; // max (and anything beyond) in last bin
        }
        ++h.counts[b];
    }
    return h;
}

// ------------------------------------------------------------ harness --

LearnerConfig LearnerConfig::s_learner(const RegressorSpec& base) {
    LearnerConfig c;
    c.name = "S";
    c.kind = LearnerKind::s;
    c.base = base;
    return c;
}

LearnerConfig LearnerConfig::t_learner(const RegressorSpec& base) {
    LearnerConfig c;
    c.name = "T";
    c.kind = LearnerKind::t;
    c.base = base;
    return c;
}

LearnerConfig LearnerConfig::x_learner(const RegressorSpec& base) {
    LearnerConfig c;
    c.name = "X";
    c.kind = LearnerKind::x;
    c.base = base;
    return c;
}

LearnerConfig LearnerConfig::r_learner(const RegressorSpec& base) {
    LearnerConfig c;
    c.name = "R";
    c.kind = LearnerKind::r;
    c.base = base;
    c.r.outcome = base;
    return c;
}

std::vector<LearnerConfig> default_learner_set(const RegressorSpec& base) {
    return {LearnerConfig::s_learner(base), LearnerConfig::t_learner(base),
            LearnerConfig::x_learner(base), LearnerConfig::r_learner(base)};
}

FittedCateModel fit_learner(const ObservationalDataset& data, const LearnerConfig& config) {
    switch (config.kind) {
        case LearnerKind::s:
            return fit_s(data, config.base, config.s_treatment_scale);
        case LearnerKind::t:
            return fit_t(data, config.base, config.base1.value_or(config.base));
        case LearnerKind::x:
            return fit_x(data, config.base, config.base1.value_or(config.base),
                         config.tau_base0.value_or(config.base),
                         config.tau_base1.value_or(config.base), config.weights);
        case LearnerKind::r:
            return fit_r(data, config.r);
    }
    throw EstimationError("unknown learner kind");
}

namespace {

struct RepOutcome {
    std::optional<CateMetrics> metrics;
    double ate = std::numeric_limits<double>::quiet_NaN();
    std::string error;
    std::vector<double> tau_hat; // kept only for the final replication
};

} // namespace

BenchmarkReport benchmark(const ScenarioSpec& scenario, const std::vector<LearnerConfig>& learners,
                          std::size_t replications, std::uint64_t seed, std::size_t threads,
                          std::size_t hist_bins) {
    if (replications < 1) throw EstimationError("benchmark: replications must be >= 1");
    if (hist_bins < 1) throw EstimationError("benchmark: hist_bins must be >= 1");
    scenario.validate();

    // rep x learner grid, filled independently per replication.
    std::vector<std::vector<RepOutcome>> grid(replications,
                                              std::vector<RepOutcome>(learners.size()));

    auto run_replication = [&](std::size_t rep) {
        ScenarioSpec draw = scenario;
        draw.seed = seed + rep;
        const SyntheticSample sample = generate(draw);
        const bool keep_tau = rep + 1 == replications;
        for (std::size_t li = 0; li < learners.size(); ++li) {
            RepOutcome& cell = grid[rep][li];
            try {
                const auto model = fit_learner(sample.dataset, learners[li]);
                auto tau_hat = model.predict_cate(sample.dataset.features);
                cell.metrics = cate_metrics(tau_hat, sample.true_cate);
                cell.ate = mean(tau_hat);
                if (keep_tau) cell.tau_hat = std::move(tau_hat);
            } catch (const std::exception& ex) {
                cell.error = ex.what();
            }
        }
    };

    if (threads <= 1 || replications == 1) {
        for (std::size_t rep = 0; rep < replications; ++rep) run_replication(rep);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t rep = next.fetch_add(1); rep < replications;
                 rep = next.fetch_add(1))
                run_replication(rep);
        };
        std::vector<std::thread> pool;
        const std::size_t count = std::min(threads, replications);
        pool.reserve(count);
        for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    BenchmarkReport report;
    report.scenario = scenario;
    report.replications = replications;
    report.seed = seed;
    report.hist_bins = hist_bins;

    for (std::size_t li = 0; li < learners.size(); ++li) {
        LearnerResult res;
        res.name = learners[li].name.empty() ? learner_kind_name(learners[li].kind)
                                             : learners[li].name;
        CateMetrics acc{};
        double ate_acc = 0.0;
        for (std::size_t rep = 0; rep < replications; ++rep) {
            const RepOutcome& cell = grid[rep][li];
            res.per_replication.push_back(cell.metrics);
            res.ate_per_replication.push_back(cell.ate);
            if (!cell.error.empty())
                res.errors.push_back("replication " + std::to_string(rep) + ": " + cell.error);
            if (cell.metrics) {
                ++res.ok_replications;
                acc.rmse += cell.metrics->rmse;
                acc.mae += cell.metrics->mae;
                acc.bias += cell.metrics->bias;
                acc.abs_bias += cell.metrics->abs_bias;
                acc.variance += cell.metrics->variance;
                acc.error_variance += cell.metrics->error_variance;
                ate_acc += cell.ate;
            }
        }
        if (res.ok_replications > 0) {
            const double inv = 1.0 / static_cast<double>(res.ok_replications);
            res.mean_metrics = {acc.rmse * inv,     acc.mae * inv,
                                acc.bias * inv,     acc.abs_bias * inv,
                                acc.variance * inv, acc.error_variance * inv};
            res.mean_ate = ate_acc * inv;
        }
        const auto& final_tau = grid[replications - 1][li].tau_hat;
        if (!final_tau.empty()) res.hist = histogram(final_tau, hist_bins);
        report.learners.push_back(std::move(res));
    }
    return report;
}

// ------------------------------------------------------- serialization --

namespace {

void append_metrics(std::ostringstream& out, const std::string& indent, const CateMetrics& m) {
    out << indent << "rmse: " << format_double(m.rmse) << '\n';
    out << indent << "mae: " << format_double(m.mae) << '\n';
    out << indent << "bias: " << format_double(m.bias) << '\n';
    out << indent << "abs_bias: " << format_double(m.abs_bias) << '\n';
    out << indent << "variance: " << format_double(m.variance) << '\n';
    out << indent << "error_variance: " << format_double(m.error_variance) << '\n';
}

} // namespace

std::string report_to_text(const BenchmarkReport& report) {
    std::ostringstream out;
    out << "benchmark:\n";
    out << "  scenario: " << scenario_name(report.scenario.kind) << '\n';
    out << "  n: " << report.scenario.n << '\n';
    out << "  noise_sd: " << format_double(report.scenario.noise_sd) << '\n';
    out << "  treated_fraction: " << format_double(report.scenario.treated_fraction) << '\n';
    out << "  replications: " << report.replications << '\n';
    out << "  seed: " << report.seed << '\n';
    for (const auto& learner : report.learners) {
        out << "learner " << learner.name << ":\n";
        out << "  ok_replications: " << learner.ok_replications << '\n';
        out << "  mean_ate: " << format_double(learner.mean_ate) << '\n';
        out << "  mean:\n";
        append_metrics(out, "    ", learner.mean_metrics);
        for (std::size_t rep = 0; rep < learner.per_replication.size(); ++rep) {
            if (!learner.per_replication[rep]) continue;
            const auto& m = *learner.per_replication[rep];
            out << "  replication " << rep << ": rmse=" << format_double(m.rmse)
                << " mae=" << format_double(m.mae) << " bias=" << format_double(m.bias)
                << " variance=" << format_double(m.variance)
                << " ate=" << format_double(learner.ate_per_replication[rep]) << '\n';
        }
        for (const auto& err : learner.errors) out << "  error: " << err << '\n';
        if (!learner.hist.counts.empty()) {
            out << "  histogram:\n";
            for (std::size_t b = 0; b < learner.hist.counts.size(); ++b)
                out << "    [" << format_double(learner.hist.edges[b]) << ", "
                    << format_double(learner.hist.edges[b + 1])
                    << (b + 1 == learner.hist.counts.size() ? "]" : ")") << ": "
                    << learner.hist.counts[b] << '\n';
        }
    }
    return out.str();
}

std::string report_to_csv(const BenchmarkReport& report) {
    std::ostringstream out;
    out << "learner,replication,status,rmse,mae,bias,abs_bias,variance,error_variance,ate\n";
    for (const auto& learner : report.learners) {
        for (std::size_t rep = 0; rep < learner.per_replication.size(); ++rep) {
            out << learner.name << ',' << rep << ',';
            if (learner.per_replication[rep]) {
                const auto& m = *learner.per_replication[rep];
                out << "ok," << format_double(m.rmse) << ',' << format_double(m.mae) << ','
                    << format_double(m.bias) << ',' << format_double(m.abs_bias) << ','
                    << format_double(m.variance) << ',' << format_double(m.error_variance)
                    << ',' << format_double(learner.ate_per_replication[rep]) << '\n';
            } else {
                out << "error,,,,,,,\n";
            }
        }
    }
    return out.str();
}

} // namespace cate
