#include "seatvc/cli.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seatvc/csv.hpp"
#include "seatvc/errors.hpp"

namespace seatvc::cli {

namespace {

using nlohmann::json;

constexpr const char* kStage2Schema = "seatvc_stage2_v1";
constexpr const char* kStage1Schema = "seatvc_stage1_v1";

std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) throw NumericalError("failed to format floating-point value");
    return std::string(buf.data(), ptr);
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("cannot open for writing: " + path);
    out << content;
    out.flush();
    if (!out) throw InvalidInput("failed while writing: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidInput(what + " is not valid JSON: " + e.what());
    }
}

void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

sea::SpecChoice spec_from_json(const json& s) {
    if (!s.is_object()) throw InvalidInput("a spec entry must be a JSON object");
    sea::SpecChoice c;
    c.order = s.value("order", 3);
    c.knots = s.value("knots", c.order == 0 ? 0 : 30);
    c.name = s.value("name", default_spec_name(c.order));
    if (c.order < 0) throw InvalidInput("spec order must be >= 0");
    if (c.knots < 0) throw InvalidInput("spec knots must be >= 0");
    return c;
}

json spec_to_json(const sea::SpecChoice& c) {
    return json{{"name", c.name}, {"order", c.order}, {"knots", c.knots}};
}

/// Structural trajectory names in report order.
const std::vector<std::string>& structural_names() {
    static const std::vector<std::string> names = {
        "eta",       "carryover",   "alpha0",    "beta",
        "tau_ctr",   "tau_klength", "tau_retailer", "tau_brand",
        "tau_holiday", "lambda_position", "lambda_cvr",
    };
    return names;
}

const std::vector<double>& structural_series(const sea::StructuralTrajectories& s,
                                             const std::string& name) {
    if (name == "eta") return s.eta;
    if (name == "carryover") return s.carryover;
    if (name == "alpha0") return s.alpha0;
    if (name == "beta") return s.beta;
    if (name == "tau_ctr") return s.tau_ctr;
    if (name == "tau_klength") return s.tau_klength;
    if (name == "tau_retailer") return s.tau_retailer;
    if (name == "tau_brand") return s.tau_brand;
    if (name == "tau_holiday") return s.tau_holiday;
    if (name == "lambda_position") return s.lambda_position;
    if (name == "lambda_cvr") return s.lambda_cvr;
    throw InvalidInput("unknown structural trajectory: " + name);
}

std::vector<double> make_grid(int points) {
    if (points < 2) throw InvalidInput("grid_points must be >= 2");
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / (points - 1);
    return grid;
}

/// CSV cell for a possibly-masked value: masked points stay empty.
std::string cell(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

void append_trajectory_rows(std::string& out, const std::string& name, const tvc::Trajectory& tr,
                            bool with_mask_column) {
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        out += name;
        out += ',';
        out += format_double(tr.t[i]);
        out += ',';
        out += cell(tr.estimate[i]);
        out += ',';
        out += cell(tr.se[i]);
        if (with_mask_column) out += ',';
        out += '\n';
    }
}

void append_structural_rows(std::string& out, const std::string& name,
                            const sea::StructuralTrajectories& s, bool with_se_column) {
    const std::vector<double>& values = structural_series(s, name);
    for (std::size_t i = 0; i < s.t.size(); ++i) {
        out += name;
        out += ',';
        out += format_double(s.t[i]);
        out += ',';
        out += cell(values[i]);
        out += ',';
        if (with_se_column) out += ',';
        if (!std::isfinite(values[i])) out += s.mask_reasons[i];
        out += '\n';
    }
}

json structural_to_json(const sea::StructuralTrajectories& s) {
    json j;
    j["t"] = s.t;
    for (const std::string& name : structural_names()) j[name] = structural_series(s, name);
    j["alpha1"] = s.alpha1;
    j["mask_reasons"] = s.mask_reasons;
    return j;
}

json stage2_archive_json(const sea::Stage2Fit& fit) {
    return json{{"schema", kStage2Schema},
                {"alpha1", fit.alpha1},
                {"alpha1_se", fit.alpha1_se},
                {"correction_used", fit.correction_used},
                {"model", json::parse(tvc::save_model(fit.model))}};
}

sea::Stage2Fit load_stage2_archive(const std::string& path) {
    json j = parse_json_text(read_text_file(path), "model archive '" + path + "'");
    if (!j.is_object() || j.value("schema", "") != kStage2Schema)
        throw InvalidInput("'" + path + "' is not a fitted-model archive (expected schema " +
                           std::string(kStage2Schema) + ")");
    sea::Stage2Fit fit;
    fit.model = tvc::load_model(j.at("model").dump());
    fit.alpha1 = j.value("alpha1", 0.0);
    fit.alpha1_se = j.value("alpha1_se", 0.0);
    fit.correction_used = j.value("correction_used", false);
    return fit;
}

struct FitArtifacts {
    sea::PreparedPanel prepared;
    std::optional<sea::Stage1Fit> stage1;
    sea::Stage2Fit stage2;
    std::vector<std::string> warnings;
};

/// Shared prepare -> stage1 -> stage2 pipeline for cmd_fit.
FitArtifacts run_two_stage(const RunConfig& cfg) {
    std::vector<RawAdDay> records = csv::read_raw_csv_file(cfg.input);
    if (records.empty()) throw InvalidInput("no rows in input: " + cfg.input);

    sea::PrepareOptions popt;
    popt.log_offset = cfg.log_offset;
    popt.cpc_from_spend = cfg.cpc_from_spend;
    popt.position_quadratic = cfg.position_quadratic;

    FitArtifacts art{sea::prepare_panel(std::move(records), popt), std::nullopt, {}, {}};

    spline::BasisSpec basis =
        tvc::resolve_basis(art.prepared.data, cfg.spec.order, cfg.spec.knots);

    Eigen::VectorXd residuals;
    if (art.prepared.report.has_demand) {
        art.stage1 = sea::stage1_budget(art.prepared.data, basis);
        residuals = art.stage1->residuals;
    } else {
        art.warnings.push_back(
            "input has no demand column; budget stage skipped and no endogeneity correction "
            "applied");
    }

    sea::Stage2Options sopt;
    sopt.include_correction = art.stage1.has_value();
    sopt.position_quadratic = cfg.position_quadratic;
    art.stage2 = sea::stage2_response(art.prepared.data, residuals, basis, sopt);
    return art;
}

json prepare_report_json(const sea::PrepareReport& r) {
    return json{{"rows_in", r.rows_in},
                {"rows_out", r.rows_out},
                {"excluded_zero_impressions", r.excluded_zero_impressions},
                {"excluded_zero_clicks", r.excluded_zero_clicks},
                {"excluded_zero_conversions", r.excluded_zero_conversions},
                {"excluded_nonpositive_spend", r.excluded_nonpositive_spend},
                {"excluded_zero_demand", r.excluded_zero_demand},
                {"excluded_first_record", r.excluded_first_record},
                {"ad_count", r.ad_count},
                {"has_demand", r.has_demand},
                {"day_min", r.day_min},
                {"day_max", r.day_max}};
}

json model_stats_json(const tvc::FittedTvcModel& m) {
    return json{{"neg2_res_ll", m.stats.neg2_res_log_likelihood},
                {"aic", m.stats.aic},
                {"bic", m.stats.bic},
                {"effective_parameters", m.stats.effective_param_count},
                {"converged", m.converged},
                {"iterations", m.iterations},
                {"residual_variance", m.residual_variance},
                {"lambdas", m.lambdas},
                {"boundary_flags", m.boundary_flags}};
}

void log_line(const std::string& msg) { std::cerr << "[seatvc] " << msg << "\n"; }

}  // namespace

std::string default_spec_name(int order) {
    switch (order) {
        case 0: return "MODEL-Time-Invariant";
        case 1: return "MODEL-Time-Varying-linear";
        case 2: return "MODEL-Time-Varying-quadratic";
        case 3: return "MODEL-Time-Varying-cubic";
        default: return "MODEL-Time-Varying-order" + std::to_string(order);
    }
}

std::string run_config_to_json(const RunConfig& config) {
    json j;
    j["command"] = config.command;
    const bool all = config.command.empty();
    if (config.command == "simulate" || (all && config.simulate.has_value())) {
        if (!config.simulate.has_value())
            throw InvalidInput("simulate config missing its 'simulate' section");
        j["simulate"] = json::parse(sim::sim_config_to_json(*config.simulate));
        if (!all) return j.dump(2) + "\n";
    }
    if (config.command == "fit" || all) {
        j["input"] = config.input;
        j["log_offset"] = config.log_offset;
        j["cpc_from_spend"] = config.cpc_from_spend;
        j["position_quadratic"] = config.position_quadratic;
        j["eta_floor"] = config.eta_floor;
        j["beta_floor"] = config.beta_floor;
        j["grid_points"] = config.grid_points;
        j["knot_policy"] = "quantile";
        j["spec"] = spec_to_json(config.spec);
    }
    if (config.command == "compare" || all) {
        j["input"] = config.input;
        j["log_offset"] = config.log_offset;
        j["cpc_from_spend"] = config.cpc_from_spend;
        j["position_quadratic"] = config.position_quadratic;
        j["knot_policy"] = "quantile";
        json arr = json::array();
        for (const sea::SpecChoice& s : config.specs) arr.push_back(spec_to_json(s));
        j["specs"] = arr;
        if (!all) j["spec"] = spec_to_json(config.spec);
    }
    if (config.command == "trajectories" || all) {
        j["input"] = config.input;
        j["grid_points"] = config.grid_points;
        j["eta_floor"] = config.eta_floor;
        j["beta_floor"] = config.beta_floor;
        j["covariates"] = config.covariates;
    }
    return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& json_text) {
    json j = parse_json_text(json_text, "run config");
    if (!j.is_object()) throw InvalidInput("run config must be a JSON object");
    RunConfig cfg;
    cfg.command = j.value("command", "");
    cfg.input = j.value("input", "");
    cfg.log_offset = j.value("log_offset", 1.0);
    cfg.cpc_from_spend = j.value("cpc_from_spend", true);
    cfg.position_quadratic = j.value("position_quadratic", false);
    cfg.eta_floor = j.value("eta_floor", 0.02);
    cfg.beta_floor = j.value("beta_floor", 1e-6);
    cfg.grid_points = j.value("grid_points", 101);
    if (!(cfg.log_offset > 0.0)) throw InvalidInput("log_offset must be > 0");
    if (cfg.eta_floor < 0.0 || cfg.beta_floor < 0.0)
        throw InvalidInput("eta_floor and beta_floor must be >= 0");
    if (cfg.grid_points < 2) throw InvalidInput("grid_points must be >= 2");
    if (j.contains("knot_policy") && j.at("knot_policy") != "quantile")
        throw InvalidInput("unsupported knot_policy (only 'quantile' is implemented)");
    if (j.contains("spec")) cfg.spec = spec_from_json(j.at("spec"));
    if (j.contains("specs")) {
        if (!j.at("specs").is_array()) throw InvalidInput("'specs' must be an array");
        for (const json& s : j.at("specs")) cfg.specs.push_back(spec_from_json(s));
    }
    if (j.contains("covariates")) {
        if (!j.at("covariates").is_array()) throw InvalidInput("'covariates' must be an array");
        for (const json& c : j.at("covariates")) cfg.covariates.push_back(c.get<std::string>());
    }
    if (j.contains("simulate")) cfg.simulate = sim::sim_config_from_json(j.at("simulate").dump());
    return cfg;
}

void cmd_simulate(const RunConfig& config, const std::string& out_dir) {
    if (!config.simulate.has_value())
        throw InvalidInput(
            "simulate needs a 'simulate' config section with at least a 'seed' (pass --seed or "
            "--config)");
    sim::SimResult result = sim::generate(*config.simulate);

    std::filesystem::create_directories(out_dir);
    csv::write_raw_csv_file(out_dir + "/dataset.csv", result.records);
    std::string truth = sim::ground_truth_to_json(result.truth);
    if (truth.empty() || truth.back() != '\n') truth += '\n';
    write_text_file(out_dir + "/ground_truth.json", truth);

    RunConfig echo = config;
    echo.command = "simulate";
    write_text_file(out_dir + "/run_config.json", run_config_to_json(echo));
    log_line("simulated " + std::to_string(result.records.size()) + " ad-days into " + out_dir);
}

void cmd_fit(const RunConfig& config, const std::string& out_dir) {
    if (config.input.empty()) throw InvalidInput("fit needs an input CSV (--input or config)");
    FitArtifacts art = run_two_stage(config);
    for (const std::string& w : art.warnings) log_line("warning: " + w);

    std::vector<double> grid = make_grid(config.grid_points);
    sea::StructuralTrajectories structural =
        sea::recover_structural(art.stage2, grid, config.eta_floor, config.beta_floor);

    std::filesystem::create_directories(out_dir);

    std::string reduced_csv = "covariate,t,estimate,se\n";
    for (const std::string& name : art.stage2.model.coefficient_names()) {
        tvc::Trajectory tr =
            tvc::eval_coefficient(art.stage2.model, name, grid, tvc::Scale::Original);
        append_trajectory_rows(reduced_csv, name, tr, /*with_mask_column=*/false);
    }
    write_text_file(out_dir + "/trajectories_reduced.csv", reduced_csv);

    std::string structural_csv = "covariate,t,estimate,mask_reason\n";
    for (const std::string& name : structural_names())
        append_structural_rows(structural_csv, name, structural, /*with_se_column=*/false);
    write_text_file(out_dir + "/trajectories_structural.csv", structural_csv);
    write_json_file(out_dir + "/trajectories_structural.json", structural_to_json(structural));

    write_json_file(out_dir + "/model.json", stage2_archive_json(art.stage2));
    if (art.stage1.has_value()) {
        json s1{{"schema", kStage1Schema},
                {"r2_uncentered", art.stage1->r2_uncentered},
                {"residual_sd", art.stage1->residual_sd},
                {"model", json::parse(tvc::save_model(art.stage1->model))}};
        write_json_file(out_dir + "/stage1_model.json", s1);
    }

    json report;
    report["exclusions"] = prepare_report_json(art.prepared.report);
    report["spec"] = spec_to_json(config.spec);
    report["stage1"] = art.stage1.has_value()
                           ? json{{"skipped", false},
                                  {"r2_uncentered", art.stage1->r2_uncentered},
                                  {"residual_sd", art.stage1->residual_sd},
                                  {"stats", model_stats_json(art.stage1->model)}}
                           : json{{"skipped", true}};
    report["stage2"] = model_stats_json(art.stage2.model);
    report["alpha1"] = art.stage2.alpha1;
    report["alpha1_se"] = art.stage2.alpha1_se;
    report["correction_used"] = art.stage2.correction_used;
    report["warnings"] = art.warnings;
    write_json_file(out_dir + "/report.json", report);

    RunConfig echo = config;
    echo.command = "fit";
    write_text_file(out_dir + "/run_config.json", run_config_to_json(echo));
    log_line("fitted " + config.spec.name + " on " +
             std::to_string(art.prepared.report.rows_out) + " rows into " + out_dir);
}

void cmd_compare(const RunConfig& config, const std::string& out_dir) {
    if (config.input.empty()) throw InvalidInput("compare needs an input CSV (--input or config)");
    std::vector<RawAdDay> records = csv::read_raw_csv_file(config.input);
    if (records.empty()) throw InvalidInput("no rows in input: " + config.input);

    sea::PrepareOptions popt;
    popt.log_offset = config.log_offset;
    popt.cpc_from_spend = config.cpc_from_spend;
    popt.position_quadratic = config.position_quadratic;
    sea::PreparedPanel prepared = sea::prepare_panel(std::move(records), popt);

    std::vector<sea::SpecChoice> specs =
        config.specs.empty() ? sea::standard_spec_set(config.spec.knots) : config.specs;
    std::vector<sea::ComparisonRow> rows = sea::compare_specs(prepared.data, specs);

    std::filesystem::create_directories(out_dir);

    std::string table_csv = "name,order,knots,neg2_res_ll,aic,bic,effective_parameters,converged,best_aic\n";
    for (const sea::ComparisonRow& r : rows) {
        table_csv += r.spec.name + ',' + std::to_string(r.spec.order) + ',' +
                     std::to_string(r.spec.knots) + ',' + format_double(r.neg2_res_ll) + ',' +
                     format_double(r.aic) + ',' + format_double(r.bic) + ',' +
                     format_double(r.effective_parameters) + ',' + (r.converged ? "1" : "0") +
                     ',' + (r.best_aic ? "1" : "0") + '\n';
    }
    write_text_file(out_dir + "/comparison.csv", table_csv);

    std::string table_txt;
    std::array<char, 160> line{};
    std::snprintf(line.data(), line.size(), "%-34s %5s %5s %14s %14s %14s %8s %9s %4s\n",
                  "family", "order", "knots", "-2ResLL", "AIC", "BIC", "p_eff", "converged",
                  "best");
    table_txt += line.data();
    for (const sea::ComparisonRow& r : rows) {
        std::snprintf(line.data(), line.size(),
                      "%-34s %5d %5d %14.4f %14.4f %14.4f %8.2f %9s %4s\n", r.spec.name.c_str(),
                      r.spec.order, r.spec.knots, r.neg2_res_ll, r.aic, r.bic,
                      r.effective_parameters, r.converged ? "yes" : "no", r.best_aic ? "*" : "");
        table_txt += line.data();
    }
    write_text_file(out_dir + "/comparison.txt", table_txt);

    RunConfig echo = config;
    echo.command = "compare";
    echo.specs = specs;
    write_text_file(out_dir + "/run_config.json", run_config_to_json(echo));
    log_line("compared " + std::to_string(specs.size()) + " families into " + out_dir);
}

void cmd_trajectories(const RunConfig& config, const std::string& out_dir) {
    if (config.input.empty())
        throw InvalidInput("trajectories needs a model archive (--input or config)");
    sea::Stage2Fit fit = load_stage2_archive(config.input);

    std::vector<std::string> reduced_names = fit.model.coefficient_names();
    auto is_reduced = [&](const std::string& n) {
        return std::find(reduced_names.begin(), reduced_names.end(), n) != reduced_names.end();
    };
    auto is_structural = [&](const std::string& n) {
        const auto& s = structural_names();
        return std::find(s.begin(), s.end(), n) != s.end();
    };

    std::vector<std::string> wanted = config.covariates;
    if (wanted.empty()) {
        wanted = reduced_names;
        wanted.insert(wanted.end(), structural_names().begin(), structural_names().end());
    }
    for (const std::string& name : wanted) {
        if (!is_reduced(name) && !is_structural(name)) {
            std::string available;
            for (const std::string& n : reduced_names) available += n + ", ";
            for (const std::string& n : structural_names()) available += n + ", ";
            if (!available.empty()) available.erase(available.size() - 2);
            throw InvalidInput("unknown covariate '" + name + "'; available: " + available);
        }
    }

    std::vector<double> grid = make_grid(config.grid_points);
    bool need_structural = false;
    for (const std::string& name : wanted) need_structural = need_structural || is_structural(name);
    sea::StructuralTrajectories structural;
    if (need_structural)
        structural = sea::recover_structural(fit, grid, config.eta_floor, config.beta_floor);

    std::string table = "covariate,t,estimate,se,mask_reason\n";
    json series = json::object();
    for (const std::string& name : wanted) {
        if (is_reduced(name)) {
            tvc::Trajectory tr = tvc::eval_coefficient(fit.model, name, grid, tvc::Scale::Original);
            append_trajectory_rows(table, name, tr, /*with_mask_column=*/true);
            series[name] = json{{"estimate", tr.estimate}, {"se", tr.se}};
        } else {
            append_structural_rows(table, name, structural, /*with_se_column=*/true);
            const std::vector<double>& values = structural_series(structural, name);
            json reasons = json::array();
            for (std::size_t i = 0; i < values.size(); ++i)
                reasons.push_back(std::isfinite(values[i]) ? "" : structural.mask_reasons[i]);
            series[name] = json{{"estimate", values}, {"mask_reason", reasons}};
        }
    }

    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/trajectories.csv", table);
    write_json_file(out_dir + "/trajectories.json", json{{"t", grid}, {"series", series}});

    RunConfig echo = config;
    echo.command = "trajectories";
    echo.covariates = wanted;
    write_text_file(out_dir + "/run_config.json", run_config_to_json(echo));
    log_line("evaluated " + std::to_string(wanted.size()) + " trajectories into " + out_dir);
}

int run(int argc, const char* const* argv) {
    try {
        CLI::App app{"Semi-parametric time-varying-coefficient regression for "
                     "search-advertising panels"};
        app.require_subcommand(1);

        std::string config_path;
        std::string out_dir = ".";
        std::string input_path;
        std::uint64_t seed = 0;
        int ads = 0, horizon = 0, order = 3, knots = 30, grid_points = 101;
        double noise_sd = 0, shock_sd = 0, rho = 0, missing = 0;
        double log_offset = 1.0, eta_floor = 0.02, beta_floor = 1e-6;
        bool position_quadratic = false, cpc_from_avg = false;
        std::vector<std::string> covariates;

        CLI::App* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic campaign");
        sim_cmd->add_option("-c,--config", config_path, "run-config JSON");
        sim_cmd->add_option("-o,--out", out_dir, "output directory (default .)");
        sim_cmd->add_option("--seed", seed, "RNG seed (required unless in config)");
        sim_cmd->add_option("--ads", ads, "number of ads");
        sim_cmd->add_option("--horizon", horizon, "days per ad");
        sim_cmd->add_option("--noise-sd", noise_sd, "response error sd");
        sim_cmd->add_option("--shock-sd", shock_sd, "log budget shock sd");
        sim_cmd->add_option("--rho", rho, "corr(budget shock, response error)");
        sim_cmd->add_option("--missing-rate", missing, "per ad-day missingness probability");

        CLI::App* fit_cmd = app.add_subcommand("fit", "Two-stage fit with structural recovery");
        fit_cmd->add_option("-c,--config", config_path, "run-config JSON");
        fit_cmd->add_option("-o,--out", out_dir, "output directory (default .)");
        fit_cmd->add_option("-i,--input", input_path, "dataset CSV");
        fit_cmd->add_option("--order", order, "trend polynomial degree (0-3)");
        fit_cmd->add_option("--knots", knots, "interior knot count");
        fit_cmd->add_option("--grid", grid_points, "trajectory grid resolution");
        fit_cmd->add_option("--log-offset", log_offset, "offset inside ln(sales + offset)");
        fit_cmd->add_option("--eta-floor", eta_floor, "mask structural output when |eta| <= floor");
        fit_cmd->add_option("--beta-floor", beta_floor, "mask tau output when |beta| <= floor");
        fit_cmd->add_flag("--position-quadratic", position_quadratic,
                          "add squared ad position as a covariate");
        fit_cmd->add_flag("--cpc-from-avg", cpc_from_avg,
                          "trust the records' avg_cpc instead of spend/clicks");

        CLI::App* cmp_cmd = app.add_subcommand("compare", "Fit statistics across trend families");
        cmp_cmd->add_option("-c,--config", config_path, "run-config JSON");
        cmp_cmd->add_option("-o,--out", out_dir, "output directory (default .)");
        cmp_cmd->add_option("-i,--input", input_path, "dataset CSV");
        cmp_cmd->add_option("--knots", knots, "interior knot count for the standard families");
        cmp_cmd->add_option("--log-offset", log_offset, "offset inside ln(sales + offset)");
        cmp_cmd->add_flag("--position-quadratic", position_quadratic,
                          "add squared ad position as a covariate");
        cmp_cmd->add_flag("--cpc-from-avg", cpc_from_avg,
                          "trust the records' avg_cpc instead of spend/clicks");

        CLI::App* trj_cmd =
            app.add_subcommand("trajectories", "Evaluate trajectories from a model archive");
        trj_cmd->add_option("-c,--config", config_path, "run-config JSON");
        trj_cmd->add_option("-o,--out", out_dir, "output directory (default .)");
        trj_cmd->add_option("-i,--input", input_path, "fitted-model archive (model.json)");
        trj_cmd->add_option("--grid", grid_points, "grid resolution");
        trj_cmd->add_option("--eta-floor", eta_floor, "mask structural output when |eta| <= floor");
        trj_cmd->add_option("--beta-floor", beta_floor, "mask tau output when |beta| <= floor");
        trj_cmd->add_option("--covariates", covariates, "names to evaluate (comma-separated)")
            ->delimiter(',');

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            int code = app.exit(e);
            return code == 0 ? 0 : 2;
        }

        json raw = json::object();
        if (!config_path.empty()) {
            raw = parse_json_text(read_text_file(config_path), "config '" + config_path + "'");
            if (!raw.is_object()) throw InvalidInput("run config must be a JSON object");
        }

        if (sim_cmd->parsed()) {
            raw["command"] = "simulate";
            if (sim_cmd->count("--seed") > 0) raw["simulate"]["seed"] = seed;
            if (sim_cmd->count("--ads") > 0) raw["simulate"]["n_ads"] = ads;
            if (sim_cmd->count("--horizon") > 0) raw["simulate"]["horizon_days"] = horizon;
            if (sim_cmd->count("--noise-sd") > 0) raw["simulate"]["noise_sd"] = noise_sd;
            if (sim_cmd->count("--shock-sd") > 0) raw["simulate"]["budget_shock_sd"] = shock_sd;
            if (sim_cmd->count("--rho") > 0) raw["simulate"]["endogeneity_rho"] = rho;
            if (sim_cmd->count("--missing-rate") > 0) raw["simulate"]["missing_rate"] = missing;
            cmd_simulate(run_config_from_json(raw.dump()), out_dir);
        } else if (fit_cmd->parsed()) {
            raw["command"] = "fit";
            if (fit_cmd->count("--input") > 0) raw["input"] = input_path;
            if (fit_cmd->count("--order") > 0) raw["spec"]["order"] = order;
            if (fit_cmd->count("--knots") > 0) raw["spec"]["knots"] = knots;
            if (fit_cmd->count("--grid") > 0) raw["grid_points"] = grid_points;
            if (fit_cmd->count("--log-offset") > 0) raw["log_offset"] = log_offset;
            if (fit_cmd->count("--eta-floor") > 0) raw["eta_floor"] = eta_floor;
            if (fit_cmd->count("--beta-floor") > 0) raw["beta_floor"] = beta_floor;
            if (fit_cmd->count("--position-quadratic") > 0) raw["position_quadratic"] = true;
            if (fit_cmd->count("--cpc-from-avg") > 0) raw["cpc_from_spend"] = false;
            cmd_fit(run_config_from_json(raw.dump()), out_dir);
        } else if (cmp_cmd->parsed()) {
            raw["command"] = "compare";
            if (cmp_cmd->count("--input") > 0) raw["input"] = input_path;
            if (cmp_cmd->count("--knots") > 0) raw["spec"]["knots"] = knots;
            if (cmp_cmd->count("--log-offset") > 0) raw["log_offset"] = log_offset;
            if (cmp_cmd->count("--position-quadratic") > 0) raw["position_quadratic"] = true;
            if (cmp_cmd->count("--cpc-from-avg") > 0) raw["cpc_from_spend"] = false;
            cmd_compare(run_config_from_json(raw.dump()), out_dir);
        } else if (trj_cmd->parsed()) {
            raw["command"] = "trajectories";
            if (trj_cmd->count("--input") > 0) raw["input"] = input_path;
            if (trj_cmd->count("--grid") > 0) raw["grid_points"] = grid_points;
            if (trj_cmd->count("--eta-floor") > 0) raw["eta_floor"] = eta_floor;
            if (trj_cmd->count("--beta-floor") > 0) raw["beta_floor"] = beta_floor;
            if (trj_cmd->count("--covariates") > 0) raw["covariates"] = covariates;
            cmd_trajectories(run_config_from_json(raw.dump()), out_dir);
        }
        return 0;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace seatvc::cli
