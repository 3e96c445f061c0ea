// Command-line front end: simulate synthetic scenarios, estimate
// conditional effects from CSV data, and benchmark the four metalearners.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cate/data.hpp"
#include "cate/errors.hpp"
#include "cate/evaluation.hpp"
#include "cate/metalearners.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitEstimation = 3;

enum class OutputFormat { table, csv, json_lines };

OutputFormat parse_format(const std::string& name) {
    if (name == "table") return OutputFormat::table;
    if (name == "csv") return OutputFormat::csv;
    if (name == "json-lines") return OutputFormat::json_lines;
    throw CLI::ValidationError("--format", "unknown format '" + name + "'");
}

// Base-learner and learner-selection flags shared by estimate/benchmark.
struct LearnerFlags {
    std::vector<std::string> learners = {"s", "t", "x", "r"};
    std::string base = "ols";
    double ridge_lambda = 1.0;
    std::size_t knn_k = 5;
    std::size_t boost_rounds = 200;
    double boost_lr = 0.1;
    double s_w_scale = 1.0;
    std::string g_mode = "propensity";
    double g_fixed = 0.5;
    double clip = 0.01;
    std::size_t folds = 5;
    double r_lambda = 1e-3;
    std::string r_tau_model = "linear_wls";
    std::optional<double> r_forced_propensity;
    std::uint64_t seed = 42;

    void attach(CLI::App* cmd, bool add_seed = true) {
        cmd->add_option("--learners", learners, "metalearners to run (any of s,t,x,r)")
            ->delimiter(',')
            ->capture_default_str();
        cmd->add_option("--base", base, "base learner: ols|ridge|knn|boosted_stumps")
            ->capture_default_str();
        cmd->add_option("--ridge-lambda", ridge_lambda, "ridge penalty for --base ridge")
            ->capture_default_str();
        cmd->add_option("--knn-k", knn_k, "neighbor count for --base knn")
            ->capture_default_str();
        cmd->add_option("--boost-rounds", boost_rounds, "rounds for --base boosted_stumps")
            ->capture_default_str();
        cmd->add_option("--boost-lr", boost_lr, "learning rate for --base boosted_stumps")
            ->capture_default_str();
        cmd->add_option("--s-w-scale", s_w_scale,
                        "scale of the treatment column in the S-learner design")
            ->capture_default_str();
        cmd->add_option("--g-mode", g_mode, "X-learner weight rule: propensity|fixed")
            ->capture_default_str();
        cmd->add_option("--g-fixed", g_fixed, "fixed g value when --g-mode fixed")
            ->capture_default_str();
        cmd->add_option("--clip", clip, "propensity clip bound in (0,0.5)")
            ->capture_default_str();
        cmd->add_option("--folds", folds, "R-learner cross-fitting fold count")
            ->capture_default_str();
        cmd->add_option("--r-lambda", r_lambda, "R-learner ridge penalty on the tau model")
            ->capture_default_str();
        cmd->add_option("--r-tau-model", r_tau_model,
                        "R-learner tau model: linear_wls|pseudo_outcome")
            ->capture_default_str();
        cmd->add_option("--r-forced-propensity", r_forced_propensity,
                        "known-constant propensity for the R-learner (randomized data)");
        if (add_seed)
            cmd->add_option("--seed", seed, "seed for fold assignment and any stochastic base")
                ->capture_default_str();
    }

    cate::RegressorSpec base_spec() const {
        using cate::RegressorSpec;
        RegressorSpec spec;
        if (base == "ols") {
            spec = RegressorSpec::ols();
        } else if (base == "ridge") {
            spec = RegressorSpec::ridge(ridge_lambda);
        } else if (base == "knn") {
            spec = RegressorSpec::knn(knn_k);
        } else if (base == "boosted_stumps") {
            spec = RegressorSpec::boosted_stumps(boost_rounds, boost_lr);
        } else {
            throw cate::EstimationError("unknown base learner '" + base + "'");
        }
        spec.seed = seed;
        return spec;
    }

    std::vector<cate::LearnerConfig> configs() const {
        const auto base_s = base_spec();
        std::vector<cate::LearnerConfig> out;
        for (const auto& name : learners) {
            const auto kind = cate::parse_learner_kind(name);
            if (!kind) throw cate::EstimationError("unknown learner name '" + name + "'");
            cate::LearnerConfig cfg;
            switch (*kind) {
                case cate::LearnerKind::s: cfg = cate::LearnerConfig::s_learner(base_s); break;
                case cate::LearnerKind::t: cfg = cate::LearnerConfig::t_learner(base_s); break;
                case cate::LearnerKind::x: cfg = cate::LearnerConfig::x_learner(base_s); break;
                case cate::LearnerKind::r: cfg = cate::LearnerConfig::r_learner(base_s); break;
            }
            cfg.s_treatment_scale = s_w_scale;
            cfg.weights.propensity.clip = clip;
            if (g_mode == "fixed") {
                cfg.weights.mode = cate::GMode::fixed;
                cfg.weights.fixed_value = g_fixed;
            } else if (g_mode != "propensity") {
                throw cate::EstimationError("unknown g-mode '" + g_mode + "'");
            }
            cfg.r.fold_count = folds;
            cfg.r.lambda = r_lambda;
            cfg.r.outcome = base_s;
            cfg.r.tau_spec = base_s;
            cfg.r.propensity.clip = clip;
            cfg.r.forced_propensity = r_forced_propensity;
            cfg.r.seed = seed;
            if (r_tau_model == "pseudo_outcome") {
                cfg.r.tau_model = cate::TauModelKind::pseudo_outcome;
            } else if (r_tau_model != "linear_wls") {
                throw cate::EstimationError("unknown tau model '" + r_tau_model + "'");
            }
            out.push_back(std::move(cfg));
        }
        return out;
    }
};

struct ScenarioFlags {
    std::string scenario = "electricity";
    std::size_t n = 5000;
    double noise_sd = 1.0;
    double treated_fraction = 0.3;
    std::uint64_t seed = 42;
    std::vector<double> beta;
    std::vector<double> theta;
    double tau_intercept = 2.0;
    std::vector<double> gamma;
    double gamma_intercept = -3.0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--scenario", scenario, "linear|null_effect|confounded|electricity")
            ->capture_default_str();
        cmd->add_option("--n", n, "unit count")->capture_default_str();
        cmd->add_option("--noise-sd", noise_sd, "outcome noise standard deviation")
            ->capture_default_str();
        cmd->add_option("--treated-fraction", treated_fraction,
                        "P(W=1) for randomized scenarios")
            ->capture_default_str();
        cmd->add_option("--seed", seed, "generator seed")->capture_default_str();
        cmd->add_option("--beta", beta, "baseline outcome slopes (linear family)")
            ->delimiter(',');
        cmd->add_option("--theta", theta, "effect slopes (linear family)")->delimiter(',');
        cmd->add_option("--tau-intercept", tau_intercept, "effect level (linear family)")
            ->capture_default_str();
        cmd->add_option("--gamma", gamma, "confounded assignment slopes")->delimiter(',');
        cmd->add_option("--gamma-intercept", gamma_intercept,
                        "confounded assignment intercept")
            ->capture_default_str();
    }

    cate::ScenarioSpec spec() const {
        cate::ScenarioSpec s;
        const auto kind = cate::parse_scenario(scenario);
        if (!kind) throw cate::DataError("unknown scenario '" + scenario + "'");
        s.kind = *kind;
        s.n = n;
        s.noise_sd = noise_sd;
        s.treated_fraction = treated_fraction;
        s.seed = seed;
        if (!beta.empty()) s.beta = beta;
        s.theta = theta.empty() ? std::vector<double>(s.beta.size(), 0.0) : theta;
        s.tau_intercept = tau_intercept;
        if (!gamma.empty())
            s.gamma = gamma;
        else if (s.gamma.size() != s.beta.size())
            s.gamma.assign(s.beta.size(), 2.0);
        s.gamma_intercept = gamma_intercept;
        s.validate();
        return s;
    }
};

std::string default_truth_path(const std::string& out) {
    const auto pos = out.rfind(".csv");
    if (pos != std::string::npos && pos == out.size() - 4)
        return out.substr(0, pos) + "_truth.csv";
    return out + "_truth.csv";
}

void print_warnings(const cate::FittedCateModel& model, const std::string& name) {
    for (const auto& w : model.warnings())
        std::cerr << "warning: " << name << ": " << w << '\n';
}

// ------------------------------------------------------------ simulate --

int run_simulate(const ScenarioFlags& scenario_flags, const std::string& out,
                 const std::string& truth_out) {
    const auto spec = scenario_flags.spec();
    const auto sample = cate::generate(spec);
    cate::save_dataset_csv(sample.dataset, out);
    cate::save_truth_csv(sample, truth_out.empty() ? default_truth_path(out) : truth_out);

    const double treated = static_cast<double>(sample.dataset.treated_count()) /
                           static_cast<double>(sample.dataset.n());
    std::cout << "scenario: " << cate::scenario_name(spec.kind) << '\n'
              << "n: " << sample.dataset.n() << '\n'
              << "d: " << sample.dataset.d() << '\n'
              << "treated_fraction: " << cate::format_double(treated) << '\n'
              << "true_ate: " << cate::format_double(cate::mean(sample.true_cate)) << '\n';
    return kExitOk;
}

// ------------------------------------------------------------ estimate --

struct EstimateOutput {
    std::string name;
    double ate = 0.0;
    std::optional<cate::CateMetrics> metrics;
    std::optional<cate::Histogram> hist;
};

void print_histogram_line(const std::string& name, const cate::Histogram& hist) {
    std::printf("histogram %s:", name.c_str());
    for (std::size_t b = 0; b < hist.counts.size(); ++b)
        std::printf(" [%s,%s%s %zu", cate::format_double(hist.edges[b]).c_str(),
                    cate::format_double(hist.edges[b + 1]).c_str(),
                    b + 1 == hist.counts.size() ? "]" : ")", hist.counts[b]);
    std::printf("\n");
}

void print_estimates(OutputFormat format, const std::vector<EstimateOutput>& results) {
    if (format == OutputFormat::table) {
        std::printf("%-8s %14s", "learner", "ate");
        if (results.front().metrics)
            std::printf(" %12s %12s %12s %12s", "rmse", "mae", "variance", "bias");
        std::printf("\n");
        for (const auto& r : results) {
            std::printf("%-8s %14.6f", r.name.c_str(), r.ate);
            if (r.metrics)
                std::printf(" %12.6f %12.6f %12.6f %12.6f", r.metrics->rmse, r.metrics->mae,
                            r.metrics->variance, r.metrics->bias);
            std::printf("\n");
        }
        for (const auto& r : results)
            if (r.hist) print_histogram_line(r.name, *r.hist);
        return;
    }
    if (format == OutputFormat::csv) {
        std::cout << "learner,ate,rmse,mae,bias,abs_bias,variance,error_variance\n";
        for (const auto& r : results) {
            std::cout << r.name << ',' << cate::format_double(r.ate);
            if (r.metrics)
                std::cout << ',' << cate::format_double(r.metrics->rmse) << ','
                          << cate::format_double(r.metrics->mae) << ','
                          << cate::format_double(r.metrics->bias) << ','
                          << cate::format_double(r.metrics->abs_bias) << ','
                          << cate::format_double(r.metrics->variance) << ','
                          << cate::format_double(r.metrics->error_variance);
            else
                std::cout << ",,,,,,";
            std::cout << '\n';
        }
        return;
    }
    for (const auto& r : results) {
        nlohmann::json j;
        j["learner"] = r.name;
        j["ate"] = r.ate;
        if (r.metrics) {
            j["rmse"] = r.metrics->rmse;
            j["mae"] = r.metrics->mae;
            j["bias"] = r.metrics->bias;
            j["abs_bias"] = r.metrics->abs_bias;
            j["variance"] = r.metrics->variance;
            j["error_variance"] = r.metrics->error_variance;
        }
        if (r.hist) {
            j["hist_edges"] = r.hist->edges;
            j["hist_counts"] = r.hist->counts;
        }
        std::cout << j.dump() << '\n';
    }
}

int run_estimate(const LearnerFlags& learner_flags, const std::string& input,
                 const std::string& treatment_col, const std::string& outcome_col,
                 const std::string& out, const std::string& truth_path, OutputFormat format,
                 std::size_t bins) {
    const auto data = cate::load_csv(input, treatment_col, outcome_col);

    std::optional<cate::GroundTruth> truth;
    if (!truth_path.empty()) {
        truth = cate::load_truth_csv(truth_path);
        if (truth->true_cate.size() != data.n())
            throw cate::DataError("ground-truth row count does not match dataset");
    }

    const auto configs = learner_flags.configs();
    std::vector<EstimateOutput> results;
    std::vector<std::vector<double>> tau_columns;
    for (const auto& cfg : configs) {
        const auto model = cate::fit_learner(data, cfg);
        print_warnings(model, cfg.name);
        auto tau = model.predict_cate(data.features);

        EstimateOutput r;
        r.name = cfg.name;
        r.ate = cate::mean(tau);
        if (truth) {
            r.metrics = cate::cate_metrics(tau, truth->true_cate);
            r.hist = cate::histogram(tau, bins);
        }
        results.push_back(std::move(r));
        tau_columns.push_back(std::move(tau));
    }

    if (!out.empty()) {
        std::ofstream file(out, std::ios::binary);
        if (!file) throw cate::DataError("cannot write file: " + out);
        for (std::size_t c = 0; c < configs.size(); ++c)
            file << (c ? "," : "") << "tau_" << configs[c].name;
        file << '\n';
        for (std::size_t i = 0; i < data.n(); ++i) {
            for (std::size_t c = 0; c < configs.size(); ++c)
                file << (c ? "," : "") << cate::format_double(tau_columns[c][i]);
            file << '\n';
        }
        if (!file) throw cate::DataError("write failed: " + out);
    }

    print_estimates(format, results);
    return kExitOk;
}

// ----------------------------------------------------------- benchmark --

void print_benchmark(OutputFormat format, const cate::BenchmarkReport& report) {
    if (format == OutputFormat::csv) {
        std::cout << cate::report_to_csv(report);
        return;
    }
    if (format == OutputFormat::json_lines) {
        for (const auto& learner : report.learners) {
            nlohmann::json j;
            j["learner"] = learner.name;
            j["ok_replications"] = learner.ok_replications;
            j["mean_ate"] = learner.mean_ate;
            j["rmse"] = learner.mean_metrics.rmse;
            j["mae"] = learner.mean_metrics.mae;
            j["bias"] = learner.mean_metrics.bias;
            j["abs_bias"] = learner.mean_metrics.abs_bias;
            j["variance"] = learner.mean_metrics.variance;
            j["error_variance"] = learner.mean_metrics.error_variance;
            if (!learner.errors.empty()) j["errors"] = learner.errors;
            std::cout << j.dump() << '\n';
        }
        return;
    }

    // Metric table of means across replications.
    std::printf("%-8s %12s %12s %12s %12s\n", "learner", "rmse", "mae", "variance", "bias");
    for (const auto& learner : report.learners)
        std::printf("%-8s %12.6f %12.6f %12.6f %12.6f\n", learner.name.c_str(),
                    learner.mean_metrics.rmse, learner.mean_metrics.mae,
                    learner.mean_metrics.variance, learner.mean_metrics.bias);

    std::printf("mean CATE estimates:");
    for (const auto& learner : report.learners)
        std::printf(" %s=%s", learner.name.c_str(),
                    cate::format_double(learner.mean_ate).c_str());
    std::printf("\n");

    for (const auto& learner : report.learners)
        if (!learner.hist.counts.empty()) print_histogram_line(learner.name, learner.hist);

    for (const auto& learner : report.learners)
        for (const auto& err : learner.errors)
            std::fprintf(stderr, "error: learner %s: %s\n", learner.name.c_str(), err.c_str());
}

int run_benchmark(const ScenarioFlags& scenario_flags, const LearnerFlags& learner_flags,
                  std::size_t replications, std::size_t threads, std::size_t bins,
                  OutputFormat format, const std::string& out_prefix) {
    const auto spec = scenario_flags.spec();
    const auto configs = learner_flags.configs();
    const auto report =
        cate::benchmark(spec, configs, replications, scenario_flags.seed, threads, bins);

    print_benchmark(format, report);

    if (!out_prefix.empty()) {
        auto write = [](const std::string& path, const std::string& content) {
            std::ofstream file(path, std::ios::binary);
            if (!file) throw cate::DataError("cannot write file: " + path);
            file << content;
            if (!file) throw cate::DataError("write failed: " + path);
        };
        write(out_prefix + "_report.txt", cate::report_to_text(report));
        write(out_prefix + "_results.csv", cate::report_to_csv(report));

        std::string hist = "learner,bin_lo,bin_hi,count\n";
        for (const auto& learner : report.learners)
            for (std::size_t b = 0; b < learner.hist.counts.size(); ++b)
                hist += learner.name + "," + cate::format_double(learner.hist.edges[b]) + "," +
                        cate::format_double(learner.hist.edges[b + 1]) + "," +
                        std::to_string(learner.hist.counts[b]) + "\n";
        write(out_prefix + "_hist.csv", hist);
    }

    // A learner with zero successful replications fails the run; the
    // individual errors already went to the error stream.
    for (const auto& learner : report.learners)
        if (learner.ok_replications == 0) return kExitEstimation;
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cate: CATE metalearners (S, T, X, R) over pluggable base learners"};
    app.require_subcommand(1);

    // simulate
    auto* simulate =
        app.add_subcommand("simulate", "draw a synthetic scenario with known ground truth");
    ScenarioFlags sim_scenario;
    sim_scenario.attach(simulate);
    std::string sim_out = "dataset.csv";
    std::string sim_truth_out;
    simulate->add_option("--out", sim_out, "dataset CSV path")->capture_default_str();
    simulate->add_option("--truth-out", sim_truth_out,
                         "ground-truth sidecar CSV path (default: <out>_truth.csv)");

    // estimate
    auto* estimate = app.add_subcommand("estimate", "fit metalearners on a CSV dataset");
    LearnerFlags est_learners;
    est_learners.attach(estimate);
    std::string est_input, est_out, est_truth;
    std::string est_treatment = "treatment", est_outcome = "outcome";
    std::string est_format = "table";
    std::size_t est_bins = 30;
    estimate->add_option("--input", est_input, "input CSV path")->required();
    estimate->add_option("--treatment-col", est_treatment, "treatment column name")
        ->capture_default_str();
    estimate->add_option("--outcome-col", est_outcome, "outcome column name")
        ->capture_default_str();
    estimate->add_option("--out", est_out, "per-row effect estimates CSV path");
    estimate->add_option("--truth", est_truth,
                         "ground-truth sidecar CSV; enables the metrics table");
    estimate->add_option("--format", est_format, "table|csv|json-lines")->capture_default_str();
    estimate->add_option("--bins", est_bins, "histogram bin count")->capture_default_str();

    // benchmark
    auto* bench =
        app.add_subcommand("benchmark", "replicate a scenario and compare the learners");
    ScenarioFlags bench_scenario;
    bench_scenario.attach(bench);
    LearnerFlags bench_learners;
    bench_learners.attach(bench, /*add_seed=*/false); // shares the scenario --seed
    std::size_t bench_reps = 10, bench_threads = 1, bench_bins = 30;
    std::string bench_format = "table", bench_prefix;
    bench->add_option("--replications", bench_reps, "replication count")->capture_default_str();
    bench->add_option("--threads", bench_threads, "worker threads for replications")
        ->capture_default_str();
    bench->add_option("--bins", bench_bins, "histogram bin count")->capture_default_str();
    bench->add_option("--format", bench_format, "table|csv|json-lines")->capture_default_str();
    bench->add_option("--out-prefix", bench_prefix,
                      "write <prefix>_report.txt, <prefix>_results.csv, <prefix>_hist.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) return run_simulate(sim_scenario, sim_out, sim_truth_out);
        if (estimate->parsed())
            return run_estimate(est_learners, est_input, est_treatment, est_outcome, est_out,
                                est_truth, parse_format(est_format), est_bins);
        bench_learners.seed = bench_scenario.seed;
        return run_benchmark(bench_scenario, bench_learners, bench_reps, bench_threads,
                             bench_bins, parse_format(bench_format), bench_prefix);
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const cate::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "estimation error: " << e.what() << '\n';
        return kExitEstimation;
    }
}
