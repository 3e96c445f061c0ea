#include "cate/metalearners.hpp"

#include <algorithm>
#include <cmath>

#include "cate/errors.hpp"

namespace cate {

const char* learner_kind_name(LearnerKind k) {
    switch (k) {
        case LearnerKind::s: return "S";
        case LearnerKind::t: return "T";
        case LearnerKind::x: return "X";
        case LearnerKind::r: return "R";
    }
    return "?";
}

std::optional<LearnerKind> parse_learner_kind(const std::string& name) {
    if (name == "s" || name == "S") return LearnerKind::s;
    if (name == "t" || name == "T") return LearnerKind::t;
    if (name == "x" || name == "X") return LearnerKind::x;
    if (name == "r" || name == "R") return LearnerKind::r;
    return std::nullopt;
}

void RLearnerConfig::validate() const {
    if (fold_count < 2) throw EstimationError("R-learner fold count must be >= 2");
    if (!(lambda >= 0.0)) throw EstimationError("R-learner lambda must be >= 0");
    if (forced_propensity && (!(*forced_propensity > 0.0) || !(*forced_propensity < 1.0)))
        throw EstimationError("forced propensity must lie strictly inside (0,1)");
    tau_spec.validate();
    outcome.validate();
    propensity.validate();
}

namespace {

struct ArmSplit {
    std::vector<std::size_t> control;
    std::vector<std::size_t> treated;
};

ArmSplit split_arms(const ObservationalDataset& data) {
    ArmSplit split;
    for (std::size_t i = 0; i < data.n(); ++i)
        (data.treatment[i] == 1 ? split.treated : split.control).push_back(i);
    return split;
}

std::vector<double> gather(std::span<const double> values, std::span<const std::size_t> idx) {
    std::vector<double> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = values[idx[i]];
    return out;
}

// [X | scale*W] design for the S-learner and the R-learner outcome model.
Matrix augmented_design(const Matrix& x, std::span<const int> w, double scale) {
    Matrix z(x.rows(), x.cols() + 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) z(i, j) = x(i, j);
        z(i, x.cols()) = scale * static_cast<double>(w[i]);
    }
    return z;
}

Matrix with_treatment_column(const Matrix& x, double value) {
    Matrix z(x.rows(), x.cols() + 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) z(i, j) = x(i, j);
        z(i, x.cols()) = value;
    }
    return z;
}

} // namespace

// ----------------------------------------------------------------- S --

FittedCateModel fit_s(const ObservationalDataset& data, const RegressorSpec& base,
                      double treatment_scale) {
    data.validate();
    if (!(treatment_scale > 0.0))
        throw EstimationError("S-learner treatment scale must be > 0");

    FittedCateModel model;
    model.kind_ = LearnerKind::s;
    model.dim_ = data.d();
    detail::SParts parts{
        fit_regressor(base, augmented_design(data.features, data.treatment, treatment_scale),
                      data.outcome),
        treatment_scale};
    model.parts_ = std::move(parts);
    return model;
}

// ----------------------------------------------------------------- T --

FittedCateModel fit_t(const ObservationalDataset& data, const RegressorSpec& base0,
                      const RegressorSpec& base1) {
    data.validate();
    const auto arms = split_arms(data);

    FittedCateModel model;
    model.kind_ = LearnerKind::t;
    model.dim_ = data.d();
    detail::TParts parts{
        fit_regressor(base0, data.features.select_rows(arms.control),
                      gather(data.outcome, arms.control)),
        fit_regressor(base1, data.features.select_rows(arms.treated),
                      gather(data.outcome, arms.treated))};
    model.parts_ = std::move(parts);
    return model;
}

// ----------------------------------------------------------------- X --

FittedCateModel fit_x(const ObservationalDataset& data, const RegressorSpec& base0,
                      const RegressorSpec& base1, const RegressorSpec& tau_base0,
                      const RegressorSpec& tau_base1, const XLearnerWeights& weights) {
    data.validate();
    if (weights.mode == GMode::fixed &&
        (!(weights.fixed_value >= 0.0) || !(weights.fixed_value <= 1.0)))
        throw EstimationError("fixed g must lie in [0,1]");

    const auto arms = split_arms(data);
    const Matrix x0 = data.features.select_rows(arms.control);
    const Matrix x1 = data.features.select_rows(arms.treated);
    const auto y0 = gather(data.outcome, arms.control);
    const auto y1 = gather(data.outcome, arms.treated);

    detail::XParts parts;
    parts.mu0 = fit_regressor(base0, x0, y0);
    parts.mu1 = fit_regressor(base1, x1, y1);

    // Imputed treatment effects: D1 on treated rows, D0 on control rows.
    const auto mu0_on_treated = parts.mu0.predict(x1);
    const auto mu1_on_control = parts.mu1.predict(x0);
    parts.d1.resize(y1.size());
    for (std::size_t i = 0; i < y1.size(); ++i) parts.d1[i] = y1[i] - mu0_on_treated[i];
    parts.d0.resize(y0.size());
    for (std::size_t i = 0; i < y0.size(); ++i) parts.d0[i] = mu1_on_control[i] - y0[i];

    parts.tau1 = fit_regressor(tau_base1, x1, parts.d1);
    parts.tau0 = fit_regressor(tau_base0, x0, parts.d0);

    parts.g_mode = weights.mode;
    parts.g_fixed = weights.fixed_value;
    if (weights.mode == GMode::propensity)
        parts.g_model = fit_classifier(weights.propensity, data.features, data.treatment);

    FittedCateModel model;
    model.kind_ = LearnerKind::x;
    model.dim_ = data.d();
    model.parts_ = std::move(parts);
    return model;
}

// ----------------------------------------------------------------- R --

namespace {

NuisanceEstimates fit_nuisances_once(const ObservationalDataset& data,
                                     const RLearnerConfig& config, std::uint64_t fold_seed) {
    const std::size_t n = data.n();
    NuisanceEstimates nuis;
    nuis.folds = assign_folds(n, config.fold_count, fold_seed);
    nuis.forced_propensity = config.forced_propensity;
    nuis.m_hat.resize(n);
    nuis.e_hat.resize(n);

    const auto members = nuis.folds.members();
    for (std::size_t q = 0; q < config.fold_count; ++q) {
        const auto train_idx = nuis.folds.complement(q);
        const Matrix train_x = data.features.select_rows(train_idx);
        std::vector<int> train_w(train_idx.size());
        for (std::size_t i = 0; i < train_idx.size(); ++i)
            train_w[i] = data.treatment[train_idx[i]];
        const auto train_y = gather(data.outcome, train_idx);

        // One outcome regressor on [X | W]; the conditional mean is read
        // off as the propensity-weighted average of its two W slices.
        nuis.outcome_models.push_back(
            fit_regressor(config.outcome, augmented_design(train_x, train_w, 1.0), train_y));
        if (!config.forced_propensity)
            nuis.propensity_models.push_back(
                fit_classifier(config.propensity, train_x, train_w));
    }

    const double clip = config.propensity.clip;
    for (std::size_t q = 0; q < config.fold_count; ++q) {
        const auto& idx = members[q];
        if (idx.empty()) continue;
        const Matrix fold_x = data.features.select_rows(idx);

        std::vector<double> e(idx.size());
        if (config.forced_propensity) {
            const double forced = std::clamp(*config.forced_propensity, clip, 1.0 - clip);
            std::fill(e.begin(), e.end(), forced);
        } else {
            e = nuis.propensity_models[q].predict_proba(fold_x);
        }

        const auto mu_control = nuis.outcome_models[q].predict(with_treatment_column(fold_x, 0.0));
        const auto mu_treated = nuis.outcome_models[q].predict(with_treatment_column(fold_x, 1.0));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            nuis.e_hat[idx[i]] = e[i];
            nuis.m_hat[idx[i]] = (1.0 - e[i]) * mu_control[i] + e[i] * mu_treated[i];
        }
    }
    return nuis;
}

} // namespace

NuisanceEstimates fit_nuisances(const ObservationalDataset& data, const RLearnerConfig& config) {
    data.validate();
    config.validate();
    try {
        return fit_nuisances_once(data, config, config.seed);
    } catch (const EstimationError&) {
        // Typically a fold complement holding a single arm; one re-seeded
        // retry, after which the error is real.
        return fit_nuisances_once(data, config, config.seed + 1);
    }
}

FittedCateModel fit_r(const ObservationalDataset& data, const RLearnerConfig& config) {
    FittedCateModel model;
    model.kind_ = LearnerKind::r;
    model.dim_ = data.d();

    detail::RParts parts;
    parts.tau_model = config.tau_model;
    parts.nuisances = fit_nuisances(data, config);

    const auto& nuis = parts.nuisances;
    const std::size_t n = data.n();
    const std::size_t d = data.d();

    std::vector<double> shift(n), residual(n);
    for (std::size_t i = 0; i < n; ++i) {
        shift[i] = static_cast<double>(data.treatment[i]) - nuis.e_hat[i];
        if (std::abs(shift[i]) < 1e-6)
            throw EstimationError("degenerate pseudo-outcome: |w - e| < 1e-6 at row " +
                                  std::to_string(i));
        residual[i] = data.outcome[i] - nuis.m_hat[i];
    }

    if (config.tau_model == TauModelKind::linear_wls) {
        // Closed-form minimizer of mean_i (residual_i - shift_i * theta.z_i)^2
        // + lambda*|theta|^2 with z = [1, x].
        const std::size_t p = d + 1;
        Matrix gram(p, p);
        std::vector<double> rhs(p, 0.0), z(p);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            z[0] = 1.0;
            const auto row = data.features.row(i);
            for (std::size_t j = 0; j < d; ++j) z[j + 1] = row[j];
            const double s2 = shift[i] * shift[i] * inv_n;
            const double sy = shift[i] * residual[i] * inv_n;
            for (std::size_t a = 0; a < p; ++a) {
                rhs[a] += sy * z[a];
                for (std::size_t b = a; b < p; ++b) gram(a, b) += s2 * z[a] * z[b];
            }
        }
        for (std::size_t a = 0; a < p; ++a) {
            for (std::size_t b = 0; b < a; ++b) gram(a, b) = gram(b, a);
            gram(a, a) += config.lambda;
        }
        parts.theta = solve_spd(std::move(gram), std::move(rhs));
    } else {
        std::vector<double> pseudo(n), w2(n);
        for (std::size_t i = 0; i < n; ++i) {
            pseudo[i] = residual[i] / shift[i];
            w2[i] = shift[i] * shift[i];
        }
        parts.tau_regressor = fit_regressor(config.tau_spec, data.features, pseudo, w2);
    }

    model.parts_ = std::move(parts);
    return model;
}

double r_loss_linear(const NuisanceEstimates& nuisances, const ObservationalDataset& data,
                     std::span<const double> theta, double lambda) {
    const std::size_t n = data.n();
    if (theta.size() != data.d() + 1)
        throw EstimationError("r_loss_linear: theta must have d+1 entries");
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double tau = theta[0];
        const auto row = data.features.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) tau += theta[j + 1] * row[j];
        const double shift = static_cast<double>(data.treatment[i]) - nuisances.e_hat[i];
        const double r = data.outcome[i] - nuisances.m_hat[i] - shift * tau;
        loss += r * r;
    }
    loss /= static_cast<double>(n);
    for (double t : theta) loss += lambda * t * t;
    return loss;
}

// ------------------------------------------------------------ predict --

std::vector<double> FittedCateModel::predict_cate(const Matrix& x) const {
    if (x.rows() > 0 && x.cols() != dim_)
        throw EstimationError("predict_cate: input has " + std::to_string(x.cols()) +
                              " columns, model expects " + std::to_string(dim_));
    if (x.rows() == 0) return {};

    if (const auto* s = std::get_if<detail::SParts>(&parts_)) {
        const auto treated = s->joint.predict(with_treatment_column(x, s->treatment_scale));
        const auto control = s->joint.predict(with_treatment_column(x, 0.0));
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = treated[i] - control[i];
        return out;
    }
    if (const auto* t = std::get_if<detail::TParts>(&parts_)) {
        const auto m1 = t->mu1.predict(x);
        const auto m0 = t->mu0.predict(x);
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = m1[i] - m0[i];
        return out;
    }
    if (const auto* xp = std::get_if<detail::XParts>(&parts_)) {
        const auto t0 = xp->tau0.predict(x);
        const auto t1 = xp->tau1.predict(x);
        const auto g = g_at(x);
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = g[i] * t0[i] + (1.0 - g[i]) * t1[i];
        return out;
    }
    const auto& r = std::get<detail::RParts>(parts_);
    if (r.tau_model == TauModelKind::linear_wls) {
        std::vector<double> out(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            double v = r.theta[0];
            const auto row = x.row(i);
            for (std::size_t j = 0; j < row.size(); ++j) v += r.theta[j + 1] * row[j];
            out[i] = v;
        }
        return out;
    }
    return r.tau_regressor->predict(x);
}

std::vector<double> FittedCateModel::g_at(const Matrix& x) const {
    const auto& xp = std::get<detail::XParts>(parts_);
    if (xp.g_mode == GMode::fixed) return std::vector<double>(x.rows(), xp.g_fixed);
    return xp.g_model->predict_proba(x);
}

const FittedRegressor& FittedCateModel::joint() const { return std::get<detail::SParts>(parts_).joint; }
const FittedRegressor& FittedCateModel::mu0() const {
    if (const auto* t = std::get_if<detail::TParts>(&parts_)) return t->mu0;
    return std::get<detail::XParts>(parts_).mu0;
}
const FittedRegressor& FittedCateModel::mu1() const {
    if (const auto* t = std::get_if<detail::TParts>(&parts_)) return t->mu1;
    return std::get<detail::XParts>(parts_).mu1;
}
const FittedRegressor& FittedCateModel::tau0() const { return std::get<detail::XParts>(parts_).tau0; }
const FittedRegressor& FittedCateModel::tau1() const { return std::get<detail::XParts>(parts_).tau1; }
std::span<const double> FittedCateModel::imputed_treated() const {
    return std::get<detail::XParts>(parts_).d1;
}
std::span<const double> FittedCateModel::imputed_control() const {
    return std::get<detail::XParts>(parts_).d0;
}
std::span<const double> FittedCateModel::r_theta() const {
    const auto& r = std::get<detail::RParts>(parts_);
    if (r.tau_model != TauModelKind::linear_wls)
        throw EstimationError("theta is only available for the linear_wls tau model");
    return r.theta;
}
const NuisanceEstimates& FittedCateModel::nuisances() const {
    return std::get<detail::RParts>(parts_).nuisances;
}

std::vector<std::string> FittedCateModel::warnings() const {
    std::vector<std::string> out;
    if (const auto* xp = std::get_if<detail::XParts>(&parts_)) {
        if (xp->g_model && !xp->g_model->converged())
            out.push_back("X-learner propensity: " + xp->g_model->status());
    } else if (const auto* rp = std::get_if<detail::RParts>(&parts_)) {
        const auto& models = rp->nuisances.propensity_models;
        for (std::size_t q = 0; q < models.size(); ++q)
            if (!models[q].converged())
                out.push_back("R-learner fold " + std::to_string(q) +
                              " propensity: " + models[q].status());
    }
    return out;
}

// ---------------------------------------------------------------- ATE --

double estimate_ate(const FittedCateModel& model, const Matrix& x) {
    if (x.rows() == 0) throw EstimationError("estimate_ate: empty input");
    return mean(model.predict_cate(x));
}

double naive_ate(const ObservationalDataset& data) {
    double sum1 = 0.0, sum0 = 0.0;
    std::size_t n1 = 0, n0 = 0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        if (data.treatment[i] == 1) {
            sum1 += data.outcome[i];
            ++n1;
        } else {
            sum0 += data.outcome[i];
            ++n0;
        }
    }
    if (n1 == 0 || n0 == 0) throw EstimationError("naive_ate: one treatment arm is empty");
    return sum1 / static_cast<double>(n1) - sum0 / static_cast<double>(n0);
}

} // namespace cate
