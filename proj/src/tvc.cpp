#include "seatvc/tvc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace seatvc::tvc {

namespace {

std::uint64_t fnv1a_bytes(const void* data, std::size_t size, std::uint64_t hash) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::uint64_t hash_design(const mixed::PenalizedDesign& d, const DesignLayout& layout) {
    std::uint64_t h = 14695981039346656037ULL;
    std::ostringstream id;
    for (const auto& name : layout.function_names) id << name << '\n';
    for (const auto& name : layout.constant_names) id << name << '\n';
    id << layout.order << ' ' << layout.knot_count;
    std::string tag = id.str();
    h = fnv1a_bytes(tag.data(), tag.size(), h);
    if (d.fixed.size() > 0)
        h = fnv1a_bytes(d.fixed.data(), sizeof(double) * static_cast<std::size_t>(d.fixed.size()), h);
    for (const auto& z : d.random_blocks)
        h = fnv1a_bytes(z.data(), sizeof(double) * static_cast<std::size_t>(z.size()), h);
    h = fnv1a_bytes(d.response.data(), sizeof(double) * static_cast<std::size_t>(d.response.size()), h);
    return h;
}

DesignLayout make_layout(const TvcSpec& spec) {
    DesignLayout layout;
    if (spec.include_intercept) layout.function_names.push_back(kInterceptName);
    for (const auto& name : spec.tvc_covariates) layout.function_names.push_back(name);
    layout.constant_names = spec.constant_covariates;
    layout.order = spec.basis.order;
    layout.knot_count = spec.basis.knot_count();
    layout.fixed_cols = layout.function_count() * (layout.order + 1) +
                        static_cast<Eigen::Index>(layout.constant_names.size());
    layout.total_cols = layout.fixed_cols + layout.function_count() * layout.knot_count;
    return layout;
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) out += ", ";
        out += n;
    }
    return out;
}

/// Weight vector over the stacked coefficients whose dot product with the
/// coefficient vector gives the requested coefficient at time t on the
/// requested scale. Shared by trajectory evaluation and standard errors.
Eigen::VectorXd coefficient_weights(const FittedTvcModel& model, const std::string& name, double t,
                                    Scale scale) {
    const DesignLayout& layout = model.layout;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(layout.total_cols);

    Eigen::VectorXd row = spline::basis_row(t, model.spec.basis);
    auto add_function = [&](Eigen::Index f, double weight) {
        w.segment(layout.fixed_offset(f), layout.order + 1) += weight * row.head(layout.order + 1);
        if (layout.knot_count > 0)
            w.segment(layout.block_offset(f), layout.knot_count) += weight * row.tail(layout.knot_count);
    };

    Eigen::Index f = layout.function_index(name);
    if (f >= 0) {
        double s = 1.0;
        if (scale == Scale::Original && name != kInterceptName) {
            auto it = model.scaling.find(name);
            if (it != model.scaling.end()) s = it->second.sd;
        }
        add_function(f, 1.0 / s);
        if (scale == Scale::Original && name == kInterceptName) {
            // The original-scale intercept absorbs the -mean/sd shift of every
            // standardized covariate: x_std = (x - m)/s contributes -m/s times
            // its coefficient when x is expressed in original units.
            for (Eigen::Index k = 0; k < layout.function_count(); ++k) {
                if (layout.function_names[static_cast<std::size_t>(k)] == kInterceptName) continue;
                auto it = model.scaling.find(layout.function_names[static_cast<std::size_t>(k)]);
                if (it == model.scaling.end()) continue;
                add_function(k, -it->second.mean / it->second.sd);
            }
            for (std::size_t c = 0; c < layout.constant_names.size(); ++c) {
                auto it = model.scaling.find(layout.constant_names[c]);
                if (it == model.scaling.end()) continue;
                w[layout.constant_column(static_cast<Eigen::Index>(c))] -=
                    it->second.mean / it->second.sd;
            }
        }
        return w;
    }

    Eigen::Index c = layout.constant_index(name);
    if (c >= 0) {
        double s = 1.0;
        if (scale == Scale::Original) {
            auto it = model.scaling.find(name);
            if (it != model.scaling.end()) s = it->second.sd;
        }
        w[layout.constant_column(c)] = 1.0 / s;
        return w;
    }

    throw InvalidInput("unknown coefficient '" + name + "'; available: " +
                       join_names(model.coefficient_names()));
}

}  // namespace

void TvcSpec::validate() const {
    basis.validate();
    std::unordered_set<std::string> seen;
    auto check = [&seen](const std::string& name) {
        if (name == kInterceptName)
            throw InvalidInput("'" + std::string(kInterceptName) + "' is reserved for the intercept function");
        if (!seen.insert(name).second)
            throw InvalidInput("covariate '" + name + "' listed twice in the model spec");
    };
    for (const auto& name : tvc_covariates) check(name);
    for (const auto& name : constant_covariates) check(name);
    if (!include_intercept && tvc_covariates.empty() && constant_covariates.empty())
        throw InvalidInput("model spec selects no terms");
}

spline::BasisSpec resolve_basis(const panel::ModelPanel& data, int order, int interior_knot_count) {
    spline::BasisSpec spec;
    spec.order = order;
    spec.knots = spline::place_knots(data.times, interior_knot_count);
    spec.validate();
    return spec;
}

Eigen::Index DesignLayout::function_index(const std::string& name) const {
    auto it = std::find(function_names.begin(), function_names.end(), name);
    return it == function_names.end() ? -1 : static_cast<Eigen::Index>(it - function_names.begin());
}

Eigen::Index DesignLayout::constant_index(const std::string& name) const {
    auto it = std::find(constant_names.begin(), constant_names.end(), name);
    return it == constant_names.end() ? -1 : static_cast<Eigen::Index>(it - constant_names.begin());
}

TvcDesign build_design(const panel::ModelPanel& data, const TvcSpec& spec) {
    data.validate();
    spec.validate();

    TvcDesign out;
    out.layout = make_layout(spec);
    const DesignLayout& layout = out.layout;
    const Eigen::Index n = data.rows();
    const int q = layout.order;
    const int h = layout.knot_count;

    std::vector<Eigen::Index> function_cols;
    for (const auto& name : layout.function_names)
        function_cols.push_back(name == kInterceptName ? -1 : data.column_of(name));
    std::vector<Eigen::Index> constant_cols;
    for (const auto& name : layout.constant_names) constant_cols.push_back(data.column_of(name));

    out.design.fixed.resize(n, layout.fixed_cols);
    if (h > 0)
        out.design.random_blocks.assign(static_cast<std::size_t>(layout.function_count()),
                                        Eigen::MatrixXd(n, h));
    out.design.response = data.response;

    Eigen::VectorXd row(spec.basis.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        double t = data.times[static_cast<std::size_t>(i)];
        if (t < spec.basis.domain_min || t > spec.basis.domain_max)
            throw InvalidInput("row " + std::to_string(i) + ": time " + std::to_string(t) +
                               " outside the basis domain");
        spline::basis_row_unchecked(t, spec.basis, row.data());

        for (Eigen::Index f = 0; f < layout.function_count(); ++f) {
            double x = function_cols[static_cast<std::size_t>(f)] < 0
                           ? 1.0
                           : data.covariates(i, function_cols[static_cast<std::size_t>(f)]);
            out.design.fixed.block(i, layout.fixed_offset(f), 1, q + 1) =
                x * row.head(q + 1).transpose();
            if (h > 0)
                out.design.random_blocks[static_cast<std::size_t>(f)].row(i) =
                    x * row.tail(h).transpose();
        }
        for (std::size_t c = 0; c < constant_cols.size(); ++c)
            out.design.fixed(i, layout.constant_column(static_cast<Eigen::Index>(c))) =
                data.covariates(i, constant_cols[c]);
    }
    return out;
}

bool FittedTvcModel::has_function(const std::string& name) const {
    return layout.function_index(name) >= 0;
}

bool FittedTvcModel::has_constant(const std::string& name) const {
    return layout.constant_index(name) >= 0;
}

std::vector<std::string> FittedTvcModel::coefficient_names() const {
    std::vector<std::string> names = layout.function_names;
    names.insert(names.end(), layout.constant_names.begin(), layout.constant_names.end());
    return names;
}

namespace {

FittedTvcModel from_mixed(const panel::ModelPanel& data, const TvcSpec& spec, TvcDesign&& built,
                          mixed::FittedMixedModel&& fit) {
    FittedTvcModel model;
    model.spec = spec;
    model.layout = std::move(built.layout);
    model.coefficients.resize(model.layout.total_cols);
    model.coefficients.head(model.layout.fixed_cols) = fit.fixed_coefficients;
    for (std::size_t b = 0; b < fit.random_coefficients.size(); ++b)
        model.coefficients.segment(model.layout.block_offset(static_cast<Eigen::Index>(b)),
                                   model.layout.knot_count) = fit.random_coefficients[b];
    model.covariance = std::move(fit.coefficient_covariance);
    model.lambdas = std::move(fit.lambdas);
    model.block_variances = std::move(fit.block_variances);
    model.residual_variance = fit.residual_variance;
    model.stats = fit.stats;
    model.scaling = data.scaling;
    model.boundary_flags = std::move(fit.boundary_flags);
    model.near_zero_residual = fit.near_zero_residual;
    model.converged = fit.converged;
    model.iterations = fit.iterations;
    model.fitted = std::move(fit.fitted);
    model.residuals = std::move(fit.residuals);
    model.design_hash = hash_design(built.design, model.layout);
    return model;
}

}  // namespace

FittedTvcModel fit(const panel::ModelPanel& data, const TvcSpec& spec,
                   const mixed::RemlOptions& options) {
    TvcDesign built = build_design(data, spec);
    auto fitted = mixed::fit_reml(built.design, options);
    return from_mixed(data, spec, std::move(built), std::move(fitted));
}

FittedTvcModel fit_with_lambdas(const panel::ModelPanel& data, const TvcSpec& spec,
                                const std::vector<double>& lambda_per_function) {
    TvcDesign built = build_design(data, spec);
    if (lambda_per_function.size() != built.design.random_blocks.size())
        throw InvalidInput("expected one lambda per coefficient function");
    auto fitted = mixed::fit_at_fixed_lambdas(built.design, lambda_per_function);
    return from_mixed(data, spec, std::move(built), std::move(fitted));
}

Trajectory eval_coefficient(const FittedTvcModel& model, const std::string& name,
                            std::span<const double> grid, Scale scale) {
    Trajectory out;
    out.t.reserve(grid.size());
    out.estimate.reserve(grid.size());
    out.se.reserve(grid.size());
    for (double t : grid) {
        Eigen::VectorXd w = coefficient_weights(model, name, t, scale);
        out.t.push_back(t);
        out.estimate.push_back(w.dot(model.coefficients));
        double var = w.dot(model.covariance * w);
        out.se.push_back(std::sqrt(std::max(var, 0.0)));
    }
    return out;
}

Eigen::VectorXd predict(const FittedTvcModel& model, const panel::ModelPanel& new_rows,
                        Extrapolation policy) {
    const DesignLayout& layout = model.layout;
    std::vector<Eigen::Index> function_cols;
    for (const auto& name : layout.function_names)
        function_cols.push_back(name == kInterceptName ? -1 : new_rows.column_of(name));
    std::vector<Eigen::Index> constant_cols;
    for (const auto& name : layout.constant_names) constant_cols.push_back(new_rows.column_of(name));

    std::vector<panel::ScalingRecord> function_scale(function_cols.size());
    for (std::size_t f = 0; f < function_cols.size(); ++f)
        if (function_cols[f] >= 0)
            function_scale[f] = model.scaling.count(layout.function_names[f])
                                    ? model.scaling.at(layout.function_names[f])
                                    : panel::ScalingRecord{};
    std::vector<panel::ScalingRecord> constant_scale(constant_cols.size());
    for (std::size_t c = 0; c < constant_cols.size(); ++c)
        constant_scale[c] = model.scaling.count(layout.constant_names[c])
                                ? model.scaling.at(layout.constant_names[c])
                                : panel::ScalingRecord{};

    const auto& basis = model.spec.basis;
    Eigen::VectorXd row(basis.size());
    Eigen::VectorXd yhat(new_rows.rows());
    for (Eigen::Index i = 0; i < new_rows.rows(); ++i) {
        double t = new_rows.times[static_cast<std::size_t>(i)];
        if (t < basis.domain_min || t > basis.domain_max) {
            if (policy == Extrapolation::Error)
                throw InvalidInput("row " + std::to_string(i) + ": time " + std::to_string(t) +
                                   " outside the fitted domain");
            t = std::clamp(t, basis.domain_min, basis.domain_max);
        }
        spline::basis_row_unchecked(t, basis, row.data());

        double y = 0.0;
        for (Eigen::Index f = 0; f < layout.function_count(); ++f) {
            double x = 1.0;
            if (function_cols[static_cast<std::size_t>(f)] >= 0)
                x = function_scale[static_cast<std::size_t>(f)].apply(
                    new_rows.covariates(i, function_cols[static_cast<std::size_t>(f)]));
            double value =
                row.head(layout.order + 1)
                    .dot(model.coefficients.segment(layout.fixed_offset(f), layout.order + 1));
            if (layout.knot_count > 0)
                value += row.tail(layout.knot_count)
                             .dot(model.coefficients.segment(layout.block_offset(f), layout.knot_count));
            y += x * value;
        }
        for (std::size_t c = 0; c < constant_cols.size(); ++c)
            y += constant_scale[c].apply(new_rows.covariates(i, constant_cols[c])) *
                 model.coefficients[layout.constant_column(static_cast<Eigen::Index>(c))];
        yhat[i] = y;
    }
    return yhat;
}

std::string save_model(const FittedTvcModel& model) {
    nlohmann::json j;
    j["format"] = "seatvc_model_v1";
    j["basis"] = {{"order", model.spec.basis.order},
                  {"knots", model.spec.basis.knots},
                  {"domain", {model.spec.basis.domain_min, model.spec.basis.domain_max}}};
    j["tvc_covariates"] = model.spec.tvc_covariates;
    j["constant_covariates"] = model.spec.constant_covariates;
    j["include_intercept"] = model.spec.include_intercept;

    j["coefficients"] = std::vector<double>(model.coefficients.data(),
                                            model.coefficients.data() + model.coefficients.size());
    std::vector<double> cov;
    cov.reserve(static_cast<std::size_t>(model.covariance.size()));
    for (Eigen::Index r = 0; r < model.covariance.rows(); ++r)
        for (Eigen::Index c = 0; c < model.covariance.cols(); ++c) cov.push_back(model.covariance(r, c));
    j["covariance"] = cov;

    j["lambdas"] = model.lambdas;
    j["block_variances"] = model.block_variances;
    j["residual_variance"] = model.residual_variance;
    j["stats"] = {{"neg2_res_log_likelihood", model.stats.neg2_res_log_likelihood},
                  {"aic", model.stats.aic},
                  {"bic", model.stats.bic},
                  {"effective_param_count", model.stats.effective_param_count}};
    nlohmann::json scaling = nlohmann::json::object();
    for (const auto& [name, record] : model.scaling)
        scaling[name] = {{"mean", record.mean}, {"sd", record.sd}};
    j["scaling"] = scaling;
    j["boundary_flags"] = model.boundary_flags;
    j["near_zero_residual"] = model.near_zero_residual;
    j["converged"] = model.converged;
    j["iterations"] = model.iterations;
    char hash_hex[17];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(model.design_hash));
    j["design_hash"] = hash_hex;
    j["se_note"] = "standard errors are conditional on the estimated penalties; "
                   "no smoothing-parameter or generated-regressor correction";
    return j.dump(2);
}

FittedTvcModel load_model(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("model archive is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "seatvc_model_v1")
            throw InvalidInput("unsupported model archive format");

        FittedTvcModel model;
        model.spec.basis.order = j.at("basis").at("order").get<int>();
        model.spec.basis.knots = j.at("basis").at("knots").get<std::vector<double>>();
        model.spec.basis.domain_min = j.at("basis").at("domain").at(0).get<double>();
        model.spec.basis.domain_max = j.at("basis").at("domain").at(1).get<double>();
        model.spec.tvc_covariates = j.at("tvc_covariates").get<std::vector<std::string>>();
        model.spec.constant_covariates = j.at("constant_covariates").get<std::vector<std::string>>();
        model.spec.include_intercept = j.at("include_intercept").get<bool>();
        model.layout = make_layout(model.spec);

        auto coeffs = j.at("coefficients").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(coeffs.size()) != model.layout.total_cols)
            throw InvalidInput("model archive coefficient count does not match its spec");
        model.coefficients = Eigen::Map<const Eigen::VectorXd>(coeffs.data(),
                                                               static_cast<Eigen::Index>(coeffs.size()));

        auto cov = j.at("covariance").get<std::vector<double>>();
        const Eigen::Index m = model.layout.total_cols;
        if (static_cast<Eigen::Index>(cov.size()) != m * m)
            throw InvalidInput("model archive covariance size does not match its spec");
        model.covariance.resize(m, m);
        for (Eigen::Index r = 0; r < m; ++r)
            for (Eigen::Index c = 0; c < m; ++c)
                model.covariance(r, c) = cov[static_cast<std::size_t>(r * m + c)];

        model.lambdas = j.at("lambdas").get<std::vector<double>>();
        model.block_variances = j.at("block_variances").get<std::vector<double>>();
        model.residual_variance = j.at("residual_variance").get<double>();
        model.stats.neg2_res_log_likelihood = j.at("stats").at("neg2_res_log_likelihood").get<double>();
        model.stats.aic = j.at("stats").at("aic").get<double>();
        model.stats.bic = j.at("stats").at("bic").get<double>();
        model.stats.effective_param_count = j.at("stats").at("effective_param_count").get<int>();
        for (const auto& [name, record] : j.at("scaling").items())
            model.scaling[name] = {record.at("mean").get<double>(), record.at("sd").get<double>()};
        model.boundary_flags = j.at("boundary_flags").get<std::vector<bool>>();
        model.near_zero_residual = j.at("near_zero_residual").get<bool>();
        model.converged = j.at("converged").get<bool>();
        model.iterations = j.at("iterations").get<int>();
        model.design_hash = std::stoull(j.at("design_hash").get<std::string>(), nullptr, 16);
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("model archive is missing required fields: ") + e.what());
    }
}

}  // namespace seatvc::tvc
