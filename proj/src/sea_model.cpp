#include "seatvc/sea_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace seatvc::sea {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string> kStandardResponseTerms = {
    kLnSalesLag, kLnAdExpenditure, kLnCtr, kKlength, kRetailer, kBrand, kHoliday, kPosition, kLnCvr};

std::string at(const RawAdDay& r) { return "ad " + r.ad_id + " day " + std::to_string(r.day_index); }

void check_record(const RawAdDay& r) {
    if (r.impressions < 0 || r.clicks < 0 || r.conversions < 0 || r.items_ordered < 0 ||
        r.sales_units < 0)
        throw InvalidInput("negative count at " + at(r));
    if (r.clicks > r.impressions) throw InvalidInput("clicks exceed impressions at " + at(r));
    if (r.conversions > r.clicks) throw InvalidInput("conversions exceed clicks at " + at(r));
    if (r.spend < 0.0 || !std::isfinite(r.spend)) throw InvalidInput("invalid spend at " + at(r));
    if (!std::isfinite(r.avg_cpc) || r.avg_cpc < 0.0) throw InvalidInput("invalid cpc at " + at(r));
    if (r.impressions > 0 && r.ad_position < 1.0)
        throw InvalidInput("ad_position below 1 for a shown ad at " + at(r));
}

}  // namespace

PreparedPanel prepare_panel(std::vector<RawAdDay> records, const PrepareOptions& options) {
    if (records.empty()) throw InvalidInput("no rows");
    if (!(options.log_offset > 0.0)) throw InvalidInput("log offset must be positive");

    std::sort(records.begin(), records.end(), [](const RawAdDay& a, const RawAdDay& b) {
        return a.ad_id != b.ad_id ? a.ad_id < b.ad_id : a.day_index < b.day_index;
    });

    PreparedPanel out;
    PrepareReport& rep = out.report;
    rep.rows_in = records.size();
    rep.has_demand = true;
    rep.day_min = records.front().day_index;
    rep.day_max = records.front().day_index;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const RawAdDay& r = records[i];
        check_record(r);
        if (i > 0 && r.ad_id == records[i - 1].ad_id && r.day_index == records[i - 1].day_index)
            throw InvalidInput("duplicate record at " + at(r));
        rep.day_min = std::min(rep.day_min, r.day_index);
        rep.day_max = std::max(rep.day_max, r.day_index);
        if (r.demand < 0) rep.has_demand = false;
    }
    const double day_span = rep.day_max > rep.day_min ? rep.day_max - rep.day_min : 1.0;

    std::vector<std::string> names = {kLnSalesLag, kLnAdExpenditure, kLnCtr, kLnCvr, kLnCpc};
    if (rep.has_demand) names.push_back(kLnDemand);
    names.insert(names.end(), {kKlength, kRetailer, kBrand, kHoliday, kPosition});
    if (options.position_quadratic) names.push_back(kPositionSq);

    std::vector<double> response;
    std::vector<std::vector<double>> cols(names.size());
    std::vector<std::string> subjects;
    std::vector<double> times;

    const RawAdDay* prev = nullptr;
    for (const RawAdDay& r : records) {
        // The previous record's sales always feed the next row's lag, even
        // when that previous row itself was excluded from the panel.
        const RawAdDay* lag = (prev != nullptr && prev->ad_id == r.ad_id) ? prev : nullptr;
        prev = &r;

        if (lag == nullptr) {
            ++rep.ad_count;
            ++rep.excluded_first_record;
            continue;
        }
        if (r.impressions == 0) {
            ++rep.excluded_zero_impressions;
            continue;
        }
        if (r.clicks == 0) {
            ++rep.excluded_zero_clicks;
            continue;
        }
        if (r.conversions == 0) {
            ++rep.excluded_zero_conversions;
            continue;
        }
        double cpc = options.cpc_from_spend ? r.spend / static_cast<double>(r.clicks) : r.avg_cpc;
        if (!(r.spend > 0.0) || !(cpc > 0.0)) {
            ++rep.excluded_nonpositive_spend;
            continue;
        }
        if (rep.has_demand && r.demand == 0) {
            ++rep.excluded_zero_demand;
            continue;
        }

        response.push_back(std::log(static_cast<double>(r.sales_units) + options.log_offset));
        subjects.push_back(r.ad_id);
        times.push_back((r.day_index - rep.day_min) / day_span);

        std::size_t c = 0;
        cols[c++].push_back(std::log(static_cast<double>(lag->sales_units) + options.log_offset));
        cols[c++].push_back(std::log(r.spend));
        cols[c++].push_back(
            std::log(static_cast<double>(r.clicks) / static_cast<double>(r.impressions)));
        cols[c++].push_back(
            std::log(static_cast<double>(r.conversions) / static_cast<double>(r.clicks)));
        cols[c++].push_back(std::log(cpc));
        if (rep.has_demand) cols[c++].push_back(std::log(static_cast<double>(r.demand)));
        cols[c++].push_back(r.klength);
        cols[c++].push_back(r.retailer_flag);
        cols[c++].push_back(r.brand_flag);
        cols[c++].push_back(r.holiday_flag);
        cols[c++].push_back(r.ad_position);
        if (options.position_quadratic) cols[c++].push_back(r.ad_position * r.ad_position);
    }

    rep.rows_out = response.size();
    if (rep.rows_out == 0) throw InvalidInput("no usable rows after preparation");

    panel::ModelPanel& p = out.data;
    p.covariate_names = names;
    p.subject_ids = std::move(subjects);
    p.times = std::move(times);
    p.response = Eigen::Map<const Eigen::VectorXd>(response.data(),
                                                   static_cast<Eigen::Index>(response.size()));
    p.covariates.resize(static_cast<Eigen::Index>(rep.rows_out),
                        static_cast<Eigen::Index>(names.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        p.covariates.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(
            cols[c].data(), static_cast<Eigen::Index>(cols[c].size()));
    p.validate();
    return out;
}

Stage1Fit stage1_budget(const panel::ModelPanel& data, const spline::BasisSpec& basis) {
    for (const char* name : {kLnDemand, kLnCtr, kLnCpc})
        if (!data.has_covariate(name))
            throw InvalidInput(std::string("missing stage-1 regressor: ") + name);
    if (!data.has_covariate(kLnAdExpenditure))
        throw InvalidInput(std::string("missing stage-1 response: ") + kLnAdExpenditure);

    // The accounting identity ln spend = ln demand + ln CTR + ln CPC has no
    // constant term, so the stage is fit without an intercept.
    panel::ModelPanel aux = data;
    aux.response = data.covariates.col(data.column_of(kLnAdExpenditure));

    tvc::TvcSpec spec;
    spec.basis = basis;
    spec.tvc_covariates = {kLnDemand, kLnCtr, kLnCpc};
    spec.include_intercept = false;

    Stage1Fit out;
    out.model = tvc::fit(aux, spec);
    out.residuals = out.model.residuals;

    const double rss = out.residuals.squaredNorm();
    const double tss = aux.response.squaredNorm();
    out.r2_uncentered = tss > 0.0 ? 1.0 - rss / tss : 1.0;
    const Eigen::Index n = out.residuals.size();
    if (n > 1) {
        const double mean = out.residuals.mean();
        out.residual_sd =
            std::sqrt((out.residuals.array() - mean).square().sum() / static_cast<double>(n - 1));
    }
    return out;
}

Stage2Fit stage2_response(const panel::ModelPanel& data, const Eigen::VectorXd& budget_residuals,
                          const spline::BasisSpec& basis, const Stage2Options& options) {
    std::vector<std::string> terms =
        options.tvc_covariates.empty() ? kStandardResponseTerms : options.tvc_covariates;
    if (options.position_quadratic &&
        std::find(terms.begin(), terms.end(), kPositionSq) == terms.end()) {
        if (!data.has_covariate(kPositionSq))
            throw InvalidInput(std::string("panel has no ") + kPositionSq +
                               " column; prepare it with position_quadratic");
        terms.push_back(kPositionSq);
    }
    for (const auto& name : terms)
        if (name == kLnCpc)
            throw InvalidInput(std::string(kLnCpc) +
                               " is rejected by the response-stage schema check: its effect is not "
                               "identified alongside spend and CTR");

    if (budget_residuals.size() != 0 && budget_residuals.size() != data.rows())
        throw InvalidInput("misaligned budget residuals: " + std::to_string(budget_residuals.size()) +
                           " values for " + std::to_string(data.rows()) + " rows");
    bool use_correction = options.include_correction && budget_residuals.size() == data.rows();
    // An all-zero residual column carries no information and would make the
    // fixed design singular; dropping it leaves the fit identical.
    if (use_correction && budget_residuals.cwiseAbs().maxCoeff() <= 1e-10) use_correction = false;

    panel::ModelPanel aux = data;
    if (use_correction) {
        aux.covariate_names.push_back(kBudgetResidual);
        aux.covariates.conservativeResize(Eigen::NoChange, aux.covariates.cols() + 1);
        aux.covariates.col(aux.covariates.cols() - 1) = budget_residuals;
    }

    tvc::TvcSpec spec;
    spec.basis = basis;
    spec.tvc_covariates = terms;
    if (use_correction) spec.constant_covariates = {kBudgetResidual};

    Stage2Fit out;
    out.model = tvc::fit(aux, spec);
    out.correction_used = use_correction;
    if (use_correction) {
        Eigen::Index c = out.model.layout.constant_index(kBudgetResidual);
        Eigen::Index col = out.model.layout.constant_column(c);
        out.alpha1 = out.model.coefficients[col];
        out.alpha1_se = std::sqrt(std::max(0.0, out.model.covariance(col, col)));
    }
    return out;
}

ReducedTrajectories eval_reduced(const Stage2Fit& fit, std::span<const double> grid) {
    auto traj = [&](const std::string& name) {
        return tvc::eval_coefficient(fit.model, name, grid, tvc::Scale::Original).estimate;
    };
    ReducedTrajectories r;
    r.t.assign(grid.begin(), grid.end());
    r.gamma_star = traj(kLnSalesLag);
    r.alpha0_star = traj(tvc::kInterceptName);
    r.beta_star = traj(kLnAdExpenditure);
    r.tau_ctr_star = traj(kLnCtr);
    r.tau_klength_star = traj(kKlength);
    r.tau_retailer_star = traj(kRetailer);
    r.tau_brand_star = traj(kBrand);
    r.tau_holiday_star = traj(kHoliday);
    r.lambda_position_star = traj(kPosition);
    r.lambda_cvr_star = traj(kLnCvr);
    r.alpha1_star = fit.alpha1;
    return r;
}

ReducedTrajectories forward_map(const StructuralTrajectories& s) {
    const std::size_t n = s.t.size();
    ReducedTrajectories r;
    r.t = s.t;
    r.gamma_star.resize(n);
    r.alpha0_star.resize(n);
    r.beta_star.resize(n);
    r.tau_ctr_star.resize(n);
    r.tau_klength_star.resize(n);
    r.tau_retailer_star.resize(n);
    r.tau_brand_star.resize(n);
    r.tau_holiday_star.resize(n);
    r.lambda_position_star.resize(n);
    r.lambda_cvr_star.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double eta = s.eta[i];
        r.gamma_star[i] = 1.0 - eta;
        r.alpha0_star[i] = eta * s.alpha0[i];
        r.beta_star[i] = eta * s.beta[i];
        const double eb = eta * s.beta[i];
        r.tau_ctr_star[i] = eb * s.tau_ctr[i];
        r.tau_klength_star[i] = eb * s.tau_klength[i];
        r.tau_retailer_star[i] = eb * s.tau_retailer[i];
        r.tau_brand_star[i] = eb * s.tau_brand[i];
        r.tau_holiday_star[i] = eb * s.tau_holiday[i];
        r.lambda_position_star[i] = eta * s.lambda_position[i];
        r.lambda_cvr_star[i] = eta * s.lambda_cvr[i];
    }
    r.alpha1_star = s.alpha1;
    return r;
}

StructuralTrajectories recover_from_reduced(const ReducedTrajectories& r, double eta_floor,
                                            double beta_floor) {
    const std::size_t n = r.t.size();
    for (const auto* v :
         {&r.gamma_star, &r.alpha0_star, &r.beta_star, &r.tau_ctr_star, &r.tau_klength_star,
          &r.tau_retailer_star, &r.tau_brand_star, &r.tau_holiday_star, &r.lambda_position_star,
          &r.lambda_cvr_star})
        if (v->size() != n) throw InvalidInput("reduced trajectories are ragged");

    StructuralTrajectories s;
    s.t = r.t;
    s.alpha1 = r.alpha1_star;
    auto fill = [n](std::vector<double>& v) { v.assign(n, kNaN); };
    fill(s.eta);
    fill(s.carryover);
    fill(s.alpha0);
    fill(s.beta);
    fill(s.tau_ctr);
    fill(s.tau_klength);
    fill(s.tau_retailer);
    fill(s.tau_brand);
    fill(s.tau_holiday);
    fill(s.lambda_position);
    fill(s.lambda_cvr);
    s.mask_reasons.assign(n, "");

    for (std::size_t i = 0; i < n; ++i) {
        // Refold so that eta + carryover sums to 1.0 exactly in floating
        // point, not just within rounding of the subtraction.
        const double carry = 1.0 - (1.0 - r.gamma_star[i]);
        const double eta = 1.0 - carry;
        s.eta[i] = eta;
        s.carryover[i] = carry;
        if (std::abs(eta) <= eta_floor) {
            s.mask_reasons[i] = "eta at floor";
            continue;
        }
        s.alpha0[i] = r.alpha0_star[i] / eta;
        const double beta = r.beta_star[i] / eta;
        s.beta[i] = beta;
        s.lambda_position[i] = r.lambda_position_star[i] / eta;
        s.lambda_cvr[i] = r.lambda_cvr_star[i] / eta;
        if (std::abs(beta) <= beta_floor) {
            s.mask_reasons[i] = "beta at floor";
            continue;
        }
        const double eb = eta * beta;
        s.tau_ctr[i] = r.tau_ctr_star[i] / eb;
        s.tau_klength[i] = r.tau_klength_star[i] / eb;
        s.tau_retailer[i] = r.tau_retailer_star[i] / eb;
        s.tau_brand[i] = r.tau_brand_star[i] / eb;
        s.tau_holiday[i] = r.tau_holiday_star[i] / eb;
    }
    return s;
}

StructuralTrajectories recover_structural(const Stage2Fit& fit, std::span<const double> grid,
                                          double eta_floor, double beta_floor) {
    return recover_from_reduced(eval_reduced(fit, grid), eta_floor, beta_floor);
}

std::vector<SpecChoice> standard_spec_set(int knots) {
    return {{"MODEL-Time-Invariant", 0, 0},
            {"MODEL-Time-Varying-linear", 1, knots},
            {"MODEL-Time-Varying-quadratic", 2, knots},
            {"MODEL-Time-Varying-cubic", 3, knots}};
}

std::vector<ComparisonRow> compare_specs(const panel::ModelPanel& data,
                                         std::span<const SpecChoice> specs) {
    if (specs.size() < 2) throw InvalidInput("need >=2 specs");
    const bool with_stage1 = data.has_covariate(kLnDemand);

    std::vector<ComparisonRow> rows;
    rows.reserve(specs.size());
    for (const SpecChoice& spec : specs) {
        spline::BasisSpec basis = tvc::resolve_basis(data, spec.order, spec.knots);
        Eigen::VectorXd mu;
        if (with_stage1) mu = stage1_budget(data, basis).residuals;
        Stage2Fit fit = stage2_response(data, mu, basis);
        ComparisonRow row;
        row.spec = spec;
        row.neg2_res_ll = fit.model.stats.neg2_res_log_likelihood;
        row.aic = fit.model.stats.aic;
        row.bic = fit.model.stats.bic;
        row.effective_parameters = fit.model.stats.effective_param_count;
        row.converged = fit.model.converged;
        rows.push_back(row);
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].aic < rows[best].aic) best = i;
    rows[best].best_aic = true;
    return rows;
}

}  // namespace seatvc::sea
