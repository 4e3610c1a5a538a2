#include "seatvc/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

#include <json.hpp>

#include "seatvc/rng.hpp"

namespace seatvc::sim {

namespace {

/// Offset used in ln(Sales + offset); must match the preparation default so
/// the generated recursion is exactly the model the estimator sees.
constexpr double kLogOffset = 1.0;

const std::array<std::string, 10> kStructuralNames = {
    "eta",       "alpha0",       "beta",          "tau_ctr",          "tau_klength",
    "tau_brand", "tau_retailer", "tau_holiday",   "lambda_position",  "lambda_cvr"};

std::string ad_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "ad_%05d", index);
    return buf;
}

std::string join(std::span<const std::string> names) {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) out += ", ";
        out += n;
    }
    return out;
}

}  // namespace

TruthFunction TruthFunction::constant(double value) {
    TruthFunction f;
    f.kind_ = Kind::Constant;
    f.constant_ = value;
    return f;
}

TruthFunction TruthFunction::polynomial(std::vector<double> ascending_coefficients) {
    if (ascending_coefficients.empty())
        throw InvalidInput("polynomial truth needs at least one coefficient");
    TruthFunction f;
    f.kind_ = Kind::Polynomial;
    f.coefficients_ = std::move(ascending_coefficients);
    return f;
}

TruthFunction TruthFunction::sinusoid(double amplitude, double frequency, double phase) {
    TruthFunction f;
    f.kind_ = Kind::Sinusoid;
    f.amplitude_ = amplitude;
    f.frequency_ = frequency;
    f.phase_ = phase;
    return f;
}

TruthFunction TruthFunction::spline(std::vector<std::pair<double, double>> control_points) {
    if (control_points.size() < 2) throw InvalidInput("spline truth needs at least two control points");
    std::sort(control_points.begin(), control_points.end());
    for (std::size_t i = 1; i < control_points.size(); ++i)
        if (!(control_points[i].first > control_points[i - 1].first))
            throw InvalidInput("spline truth control points must have distinct times");

    TruthFunction f;
    f.kind_ = Kind::Spline;
    f.points_ = std::move(control_points);

    // Natural cubic spline: tridiagonal solve for the curvatures, zero at the ends.
    const std::size_t m = f.points_.size();
    f.second_derivs_.assign(m, 0.0);
    if (m > 2) {
        std::vector<double> h(m - 1), diag(m - 2), rhs(m - 2), upper(m - 2);
        for (std::size_t i = 0; i + 1 < m; ++i) h[i] = f.points_[i + 1].first - f.points_[i].first;
        for (std::size_t i = 1; i + 1 < m; ++i) {
            diag[i - 1] = 2.0 * (h[i - 1] + h[i]);
            upper[i - 1] = h[i];
            rhs[i - 1] = 6.0 * ((f.points_[i + 1].second - f.points_[i].second) / h[i] -
                                (f.points_[i].second - f.points_[i - 1].second) / h[i - 1]);
        }
        for (std::size_t i = 1; i < m - 2; ++i) {
            double w = h[i] / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for (std::size_t i = m - 2; i-- > 0;) {
            double upper_term = (i + 1 < m - 2) ? upper[i] * f.second_derivs_[i + 2] : 0.0;
            f.second_derivs_[i + 1] = (rhs[i] - upper_term) / diag[i];
        }
    }
    return f;
}

double TruthFunction::eval(double t) const {
    switch (kind_) {
        case Kind::Constant:
            return constant_;
        case Kind::Polynomial: {
            double v = 0.0;
            for (std::size_t i = coefficients_.size(); i-- > 0;) v = v * t + coefficients_[i];
            return v;
        }
        case Kind::Sinusoid:
            return amplitude_ * std::sin(2.0 * std::numbers::pi * frequency_ * t + phase_);
        case Kind::Spline: {
            double tc = std::clamp(t, points_.front().first, points_.back().first);
            std::size_t hi = 1;
            while (hi + 1 < points_.size() && points_[hi].first < tc) ++hi;
            std::size_t lo = hi - 1;
            double h = points_[hi].first - points_[lo].first;
            double a = (points_[hi].first - tc) / h;
            double b = (tc - points_[lo].first) / h;
            return a * points_[lo].second + b * points_[hi].second +
                   ((a * a * a - a) * second_derivs_[lo] + (b * b * b - b) * second_derivs_[hi]) *
                       h * h / 6.0;
        }
    }
    return 0.0;
}

std::span<const std::string> structural_truth_names() { return kStructuralNames; }

SimConfig SimConfig::defaults() {
    SimConfig c;
    c.truths["eta"] = TruthFunction::constant(0.4);
    c.truths["alpha0"] = TruthFunction::constant(4.0);
    c.truths["beta"] = TruthFunction::constant(0.3);
    c.truths["tau_ctr"] = TruthFunction::constant(0.5);
    c.truths["tau_klength"] = TruthFunction::constant(-0.1);
    c.truths["tau_brand"] = TruthFunction::constant(0.2);
    c.truths["tau_retailer"] = TruthFunction::constant(0.3);
    c.truths["tau_holiday"] = TruthFunction::constant(0.4);
    c.truths["lambda_position"] = TruthFunction::constant(-0.05);
    c.truths["lambda_cvr"] = TruthFunction::constant(0.3);
    return c;
}

void SimConfig::validate() const {
    if (n_ads < 1) throw InvalidInput("n_ads must be at least 1");
    if (horizon_days < 2) throw InvalidInput("horizon_days must be at least 2");
    if (!(noise_sd >= 0.0)) throw InvalidInput("noise_sd must be non-negative");
    if (!(budget_shock_sd >= 0.0)) throw InvalidInput("budget_shock_sd must be non-negative");
    if (!(endogeneity_rho >= -1.0 && endogeneity_rho <= 1.0))
        throw InvalidInput("endogeneity_rho must lie in [-1, 1]");
    if (!(missing_rate >= 0.0 && missing_rate < 1.0))
        throw InvalidInput("missing_rate must lie in [0, 1)");
    if (covariates.position_max < 1) throw InvalidInput("position_max must be at least 1");
    for (double p : {covariates.brand_prob, covariates.retailer_prob, covariates.holiday_prob,
                     covariates.klength_prob})
        if (!(p > 0.0 && p < 1.0)) throw InvalidInput("flag probabilities must lie in (0, 1)");

    for (const auto& name : kStructuralNames)
        if (!truths.count(name))
            throw InvalidInput("missing truth function '" + name + "'; required: " +
                               join(structural_truth_names()));

    const auto& eta = truths.at("eta");
    for (int i = 0; i <= 1000; ++i) {
        double v = eta.eval(i / 1000.0);
        if (!(v > 0.0 && v < 1.0))
            throw InvalidInput("eta truth must stay inside (0,1); got " + std::to_string(v) +
                               " at t=" + std::to_string(i / 1000.0));
    }
}

SimResult generate(const SimConfig& config) {
    config.validate();
    const int n = config.n_ads;
    const int horizon = config.horizon_days;
    const auto& cov = config.covariates;

    auto t_of_day = [&](int d) {
        return horizon == 1 ? 0.5 : static_cast<double>(d) / (horizon - 1);
    };
    auto truth = [&](const char* name, double t) { return config.truths.at(name).eval(t); };

    // Holiday is calendar-driven: one flag per day, shared by all ads.
    std::vector<int> holiday(static_cast<std::size_t>(horizon));
    {
        Rng hol = Rng::substream(config.seed, stable_hash("holiday-calendar"));
        for (int d = 0; d < horizon; ++d) holiday[static_cast<std::size_t>(d)] = hol.bernoulli(cov.holiday_prob);
        // A flag must be active (and inactive) on several distinct days: a
        // time-varying coefficient of polynomial degree q on a column that is
        // nonzero at fewer than q+1 times is unidentified, so up-to-cubic
        // trends need four. Day 0 never survives the lag construction, so
        // only days >= 1 count. Flips land on an even grid over that range.
        const int want = std::min(4, std::max(1, (horizon - 1) / 2));
        auto ensure_state = [&](int value) {
            int count = 0;
            for (int d = 1; d < horizon; ++d) count += (holiday[static_cast<std::size_t>(d)] == value);
            for (int k = 0; k < want && count < want; ++k) {
                int target = want == 1 ? (horizon + 1) / 2 : 1 + k * (horizon - 2) / (want - 1);
                for (int off = 0; off < horizon; ++off) {
                    int d = -1;
                    if (target + off < horizon && holiday[static_cast<std::size_t>(target + off)] != value)
                        d = target + off;
                    else if (target - off >= 1 && holiday[static_cast<std::size_t>(target - off)] != value)
                        d = target - off;
                    if (d >= 0) {
                        holiday[static_cast<std::size_t>(d)] = value;
                        ++count;
                        break;
                    }
                }
            }
        };
        ensure_state(1);
        ensure_state(0);
    }

    // Static ad attributes first, then a variation guard: a binary column that
    // came out constant would make the response design rank-deficient.
    struct Statics {
        int klength, brand, retailer;
    };
    std::vector<Statics> statics(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        Rng sr = Rng::substream(config.seed, stable_hash(ad_name(a)), 1);
        statics[static_cast<std::size_t>(a)] = {1 + sr.binomial(5, cov.klength_prob),
                                                sr.bernoulli(cov.brand_prob) ? 1 : 0,
                                                sr.bernoulli(cov.retailer_prob) ? 1 : 0};
    }
    if (n >= 2) {
        auto all_equal = [&](auto field) {
            return std::all_of(statics.begin(), statics.end(),
                               [&](const Statics& s) { return s.*field == statics[0].*field; });
        };
        if (all_equal(&Statics::brand)) statics.back().brand ^= 1;
        if (all_equal(&Statics::retailer)) statics.front().retailer ^= 1;
        if (all_equal(&Statics::klength))
            statics.front().klength += statics.front().klength < 6 ? 1 : -1;
    }

    SimResult out;
    out.truth.structural = config.truths;
    out.truth.noise_sd = config.noise_sd;
    out.truth.budget_shock_sd = config.budget_shock_sd;
    out.truth.endogeneity_rho = config.endogeneity_rho;

    for (int a = 0; a < n; ++a) {
        const std::string id = ad_name(a);
        const Statics& st = statics[static_cast<std::size_t>(a)];
        Rng g = Rng::substream(config.seed, stable_hash(id), 2);

        double ln_state = 0.0;
        bool have_state = false;
        for (int d = 0; d < horizon; ++d) {
            // Fixed number of draws per day so missingness never shifts the stream.
            double u_missing = g.uniform();
            double demand_raw = g.lognormal(cov.demand_log_mean, cov.demand_log_sd);
            double z_shock, z_eps;
            g.correlated_normals(config.endogeneity_rho, z_shock, z_eps);
            double ctr = std::clamp(g.lognormal(cov.ctr_log_mean, cov.ctr_log_sd), 1e-4, 0.9);
            double cvr = std::clamp(g.lognormal(cov.cvr_log_mean, cov.cvr_log_sd), 1e-4, 0.95);
            double cpc = g.lognormal(cov.cpc_log_mean, cov.cpc_log_sd);
            double u_pos = g.uniform();
            // A skipped day leaves the sales state untouched: the next emitted
            // record's lag is the previous emitted record's sales, exactly as
            // the preparation step will compute it.
            if (u_missing < config.missing_rate) continue;

            auto demand = std::max<std::int64_t>(1, std::llround(demand_raw));
            double shock = config.budget_shock_sd * z_shock;
            double eps = config.noise_sd * z_eps;

            auto impressions = std::max<std::int64_t>(
                1, static_cast<std::int64_t>(std::nearbyint(static_cast<double>(demand) * std::exp(shock))));
            auto clicks = std::clamp<std::int64_t>(
                static_cast<std::int64_t>(std::nearbyint(static_cast<double>(impressions) * ctr)), 0,
                impressions);
            auto conversions = std::clamp<std::int64_t>(
                static_cast<std::int64_t>(std::nearbyint(static_cast<double>(clicks) * cvr)), 0, clicks);
            double spend = static_cast<double>(clicks) * cpc;
            int position = 1 + static_cast<int>(u_pos * cov.position_max);

            const double t = t_of_day(d);
            double eta = truth("eta", t);
            // The target uses the observed (post-rounding) covariate values,
            // so the generated recursion is exactly the regression the
            // estimator runs on the emitted records.
            double target;
            if (clicks > 0 && conversions > 0 && spend > 0.0) {
                double ln_ctr = std::log(static_cast<double>(clicks) / static_cast<double>(impressions));
                double ln_cvr = std::log(static_cast<double>(conversions) / static_cast<double>(clicks));
                target = truth("alpha0", t) +
                         truth("beta", t) *
                             (std::log(spend) + truth("tau_ctr", t) * ln_ctr +
                              truth("tau_klength", t) * st.klength +
                              truth("tau_brand", t) * st.brand +
                              truth("tau_retailer", t) * st.retailer +
                              truth("tau_holiday", t) * holiday[static_cast<std::size_t>(d)]) +
                         truth("lambda_position", t) * position + truth("lambda_cvr", t) * ln_cvr;
            } else {
                // No traffic: sales decay toward the baseline level.
                target = truth("alpha0", t);
            }

            if (!have_state) {
                ln_state = target;  // steady state of the noiseless recursion
                have_state = true;
            }
            double ln_sales = (1.0 - eta) * ln_state + eta * target + eps;
            if (!(std::abs(ln_sales) <= 50.0))
                throw NumericalError("simulated ln-sales diverged: ad " + id + " day " +
                                     std::to_string(d) + " ln_sales=" + std::to_string(ln_sales) +
                                     " target=" + std::to_string(target) +
                                     " eta=" + std::to_string(eta));

            auto sales = std::max<std::int64_t>(
                0, static_cast<std::int64_t>(std::nearbyint(std::exp(ln_sales) - kLogOffset)));

            RawAdDay r;
            r.ad_id = id;
            r.day_index = d;
            r.impressions = impressions;
            r.clicks = clicks;
            r.spend = spend;
            r.avg_cpc = cpc;
            r.conversions = conversions;
            r.items_ordered = conversions;
            r.sales_units = sales;
            r.ad_position = position;
            r.klength = st.klength;
            r.brand_flag = st.brand;
            r.retailer_flag = st.retailer;
            r.holiday_flag = holiday[static_cast<std::size_t>(d)];
            r.demand = demand;
            out.records.push_back(std::move(r));

            out.truth.latent_ln_sales.push_back(ln_sales);
            out.truth.response_errors.push_back(eps);
            out.truth.budget_shocks.push_back(shock);

            ln_state = std::log(static_cast<double>(sales) + kLogOffset);
        }
    }
    return out;
}

std::vector<double> ground_truth_eval(const GroundTruth& truth, const std::string& name,
                                      std::span<const double> grid) {
    auto structural = [&](const char* key) -> const TruthFunction& {
        auto it = truth.structural.find(key);
        if (it == truth.structural.end())
            throw InvalidInput("ground truth record has no '" + std::string(key) + "' function");
        return it->second;
    };

    std::function<double(double)> f;
    if (truth.structural.count(name)) {
        const TruthFunction& fn = truth.structural.at(name);
        f = [&fn](double t) { return fn.eval(t); };
    } else if (name == "carryover" || name == "gamma_star") {
        const TruthFunction& eta = structural("eta");
        f = [&eta](double t) { return 1.0 - eta.eval(t); };
    } else if (name == "alpha0_star") {
        const TruthFunction &eta = structural("eta"), &a0 = structural("alpha0");
        f = [&](double t) { return eta.eval(t) * a0.eval(t); };
    } else if (name == "beta_star") {
        const TruthFunction &eta = structural("eta"), &beta = structural("beta");
        f = [&](double t) { return eta.eval(t) * beta.eval(t); };
    } else if (name == "lambda_position_star") {
        const TruthFunction &eta = structural("eta"), &l = structural("lambda_position");
        f = [&](double t) { return eta.eval(t) * l.eval(t); };
    } else if (name == "lambda_cvr_star") {
        const TruthFunction &eta = structural("eta"), &l = structural("lambda_cvr");
        f = [&](double t) { return eta.eval(t) * l.eval(t); };
    } else if (name.size() > 5 && name.substr(0, 4) == "tau_" &&
               name.substr(name.size() - 5) == "_star" &&
               truth.structural.count(name.substr(0, name.size() - 5))) {
        const TruthFunction &eta = structural("eta"), &beta = structural("beta");
        const TruthFunction& tau = truth.structural.at(name.substr(0, name.size() - 5));
        f = [&](double t) { return eta.eval(t) * beta.eval(t) * tau.eval(t); };
    } else {
        throw InvalidInput("unknown ground-truth name '" + name +
                           "'; structural names: " + join(structural_truth_names()) +
                           "; plus carryover and the *_star reduced forms");
    }

    std::vector<double> values;
    values.reserve(grid.size());
    for (double t : grid) values.push_back(f(t));
    return values;
}

namespace {

nlohmann::json truth_to_json(const TruthFunction& f) {
    switch (f.kind()) {
        case TruthFunction::Kind::Constant:
            return {{"kind", "constant"}, {"value", f.constant_value()}};
        case TruthFunction::Kind::Polynomial:
            return {{"kind", "polynomial"}, {"coefficients", f.coefficients()}};
        case TruthFunction::Kind::Sinusoid:
            return {{"kind", "sinusoid"},
                    {"amplitude", f.amplitude()},
                    {"frequency", f.frequency()},
                    {"phase", f.phase()}};
        case TruthFunction::Kind::Spline: {
            nlohmann::json pts = nlohmann::json::array();
            for (const auto& [t, v] : f.control_points()) pts.push_back({t, v});
            return {{"kind", "spline"}, {"points", pts}};
        }
    }
    return {};
}

TruthFunction truth_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return TruthFunction::constant(j.at("value").get<double>());
    if (kind == "polynomial")
        return TruthFunction::polynomial(j.at("coefficients").get<std::vector<double>>());
    if (kind == "sinusoid")
        return TruthFunction::sinusoid(j.at("amplitude").get<double>(), j.at("frequency").get<double>(),
                                       j.at("phase").get<double>());
    if (kind == "spline") {
        std::vector<std::pair<double, double>> pts;
        for (const auto& p : j.at("points")) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        return TruthFunction::spline(std::move(pts));
    }
    throw InvalidInput("unknown truth function kind '" + kind +
                       "'; expected constant, polynomial, sinusoid, or spline");
}

}  // namespace

std::string ground_truth_to_json(const GroundTruth& truth) {
    nlohmann::json j;
    nlohmann::json structural = nlohmann::json::object();
    for (const auto& [name, fn] : truth.structural) structural[name] = truth_to_json(fn);
    j["structural"] = structural;
    j["noise_sd"] = truth.noise_sd;
    j["budget_shock_sd"] = truth.budget_shock_sd;
    j["endogeneity_rho"] = truth.endogeneity_rho;
    j["latent_ln_sales"] = truth.latent_ln_sales;
    j["response_errors"] = truth.response_errors;
    j["budget_shocks"] = truth.budget_shocks;
    return j.dump(2);
}

GroundTruth ground_truth_from_json(const std::string& json_text) {
    try {
        nlohmann::json j = nlohmann::json::parse(json_text);
        GroundTruth t;
        for (const auto& [name, fn] : j.at("structural").items()) t.structural[name] = truth_from_json(fn);
        t.noise_sd = j.at("noise_sd").get<double>();
        t.budget_shock_sd = j.at("budget_shock_sd").get<double>();
        t.endogeneity_rho = j.at("endogeneity_rho").get<double>();
        t.latent_ln_sales = j.at("latent_ln_sales").get<std::vector<double>>();
        t.response_errors = j.at("response_errors").get<std::vector<double>>();
        t.budget_shocks = j.at("budget_shocks").get<std::vector<double>>();
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("invalid ground-truth JSON: ") + e.what());
    }
}

std::string sim_config_to_json(const SimConfig& config) {
    nlohmann::json j;
    j["n_ads"] = config.n_ads;
    j["horizon_days"] = config.horizon_days;
    j["seed"] = config.seed;
    j["noise_sd"] = config.noise_sd;
    j["budget_shock_sd"] = config.budget_shock_sd;
    j["endogeneity_rho"] = config.endogeneity_rho;
    j["missing_rate"] = config.missing_rate;
    j["covariates"] = {{"demand_log_mean", config.covariates.demand_log_mean},
                       {"demand_log_sd", config.covariates.demand_log_sd},
                       {"ctr_log_mean", config.covariates.ctr_log_mean},
                       {"ctr_log_sd", config.covariates.ctr_log_sd},
                       {"cvr_log_mean", config.covariates.cvr_log_mean},
                       {"cvr_log_sd", config.covariates.cvr_log_sd},
                       {"cpc_log_mean", config.covariates.cpc_log_mean},
                       {"cpc_log_sd", config.covariates.cpc_log_sd},
                       {"position_max", config.covariates.position_max},
                       {"brand_prob", config.covariates.brand_prob},
                       {"retailer_prob", config.covariates.retailer_prob},
                       {"holiday_prob", config.covariates.holiday_prob},
                       {"klength_prob", config.covariates.klength_prob}};
    nlohmann::json truths = nlohmann::json::object();
    for (const auto& [name, fn] : config.truths) truths[name] = truth_to_json(fn);
    j["truths"] = truths;
    return j.dump(2);
}

SimConfig sim_config_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("invalid simulation config JSON: ") + e.what());
    }
    try {
        SimConfig c = SimConfig::defaults();
        if (!j.contains("seed")) throw InvalidInput("simulation config is missing required field 'seed'");
        c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("n_ads")) c.n_ads = j.at("n_ads").get<int>();
        if (j.contains("horizon_days")) c.horizon_days = j.at("horizon_days").get<int>();
        if (j.contains("noise_sd")) c.noise_sd = j.at("noise_sd").get<double>();
        if (j.contains("budget_shock_sd")) c.budget_shock_sd = j.at("budget_shock_sd").get<double>();
        if (j.contains("endogeneity_rho")) c.endogeneity_rho = j.at("endogeneity_rho").get<double>();
        if (j.contains("missing_rate")) c.missing_rate = j.at("missing_rate").get<double>();
        if (j.contains("covariates")) {
            const auto& k = j.at("covariates");
            auto& cv = c.covariates;
            if (k.contains("demand_log_mean")) cv.demand_log_mean = k.at("demand_log_mean").get<double>();
            if (k.contains("demand_log_sd")) cv.demand_log_sd = k.at("demand_log_sd").get<double>();
            if (k.contains("ctr_log_mean")) cv.ctr_log_mean = k.at("ctr_log_mean").get<double>();
            if (k.contains("ctr_log_sd")) cv.ctr_log_sd = k.at("ctr_log_sd").get<double>();
            if (k.contains("cvr_log_mean")) cv.cvr_log_mean = k.at("cvr_log_mean").get<double>();
            if (k.contains("cvr_log_sd")) cv.cvr_log_sd = k.at("cvr_log_sd").get<double>();
            if (k.contains("cpc_log_mean")) cv.cpc_log_mean = k.at("cpc_log_mean").get<double>();
            if (k.contains("cpc_log_sd")) cv.cpc_log_sd = k.at("cpc_log_sd").get<double>();
            if (k.contains("position_max")) cv.position_max = k.at("position_max").get<int>();
            if (k.contains("brand_prob")) cv.brand_prob = k.at("brand_prob").get<double>();
            if (k.contains("retailer_prob")) cv.retailer_prob = k.at("retailer_prob").get<double>();
            if (k.contains("holiday_prob")) cv.holiday_prob = k.at("holiday_prob").get<double>();
            if (k.contains("klength_prob")) cv.klength_prob = k.at("klength_prob").get<double>();
        }
        if (j.contains("truths"))
            for (const auto& [name, fn] : j.at("truths").items()) c.truths[name] = truth_from_json(fn);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("invalid simulation config: ") + e.what());
    }
}

panel::ModelPanel simulate_tvc_panel(const TvcPanelConfig& config) {
    if (config.n_subjects < 1 || config.obs_per_subject < 2)
        throw InvalidInput("panel simulation needs at least 1 subject and 2 observations each");
    if (config.truths.empty()) throw InvalidInput("panel simulation needs at least one truth function");
    if (!(config.noise_sd >= 0.0)) throw InvalidInput("noise_sd must be non-negative");

    std::vector<std::string> covariate_names;
    for (const auto& [name, fn] : config.truths)
        if (name != "intercept") covariate_names.push_back(name);

    const Eigen::Index n =
        static_cast<Eigen::Index>(config.n_subjects) * static_cast<Eigen::Index>(config.obs_per_subject);
    panel::ModelPanel p;
    p.covariate_names = covariate_names;
    p.subject_ids.reserve(static_cast<std::size_t>(n));
    p.times.reserve(static_cast<std::size_t>(n));
    p.response.resize(n);
    p.covariates.resize(n, static_cast<Eigen::Index>(covariate_names.size()));

    Eigen::Index row = 0;
    for (int s = 0; s < config.n_subjects; ++s) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s_%05d", s);
        Rng g = Rng::substream(config.seed, stable_hash(buf));
        for (int i = 0; i < config.obs_per_subject; ++i) {
            double t = static_cast<double>(i) / (config.obs_per_subject - 1);
            double y = config.truths.count("intercept") ? config.truths.at("intercept").eval(t) : 0.0;
            for (std::size_t k = 0; k < covariate_names.size(); ++k) {
                double x = g.normal();
                p.covariates(row, static_cast<Eigen::Index>(k)) = x;
                y += config.truths.at(covariate_names[k]).eval(t) * x;
            }
            y += config.noise_sd * g.normal();
            p.subject_ids.emplace_back(buf);
            p.times.push_back(t);
            p.response[row] = y;
            ++row;
        }
    }
    return p;
}

}  // namespace seatvc::sim
