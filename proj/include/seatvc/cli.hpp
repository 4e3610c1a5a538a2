#pragma once

#include <optional>
#include <string>
#include <vector>

#include "seatvc/sea_model.hpp"
#include "seatvc/simulator.hpp"

namespace seatvc::cli {

/**
 * @brief One run's fully-resolved parameters.
 *
 * Every command echoes the resolved config it ran with as run_config.json in
 * the output directory; re-running the same command from that echo reproduces
 * all output files byte-identically. Output paths are never part of the
 * config, so runs into different directories produce identical contents.
 */
struct RunConfig {
    std::string command;  ///< informational: which command produced the echo
    std::string input;    ///< dataset CSV (fit/compare) or model archive (trajectories)
    double log_offset = 1.0;
    bool cpc_from_spend = true;
    bool position_quadratic = false;
    double eta_floor = 0.02;
    double beta_floor = 1e-6;
    int grid_points = 101;
    sea::SpecChoice spec{"MODEL-Time-Varying-cubic", 3, 30};
    std::vector<sea::SpecChoice> specs;    ///< compare candidates; empty = standard set
    std::vector<std::string> covariates;   ///< trajectories selection; empty = all
    std::optional<sim::SimConfig> simulate;
};

/// "MODEL-Time-Invariant" for order 0, "MODEL-Time-Varying-linear" /
/// "-quadratic" / "-cubic" for orders 1-3.
std::string default_spec_name(int order);

std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& json_text);

/// Generate a synthetic campaign: dataset.csv, ground_truth.json,
/// run_config.json.
void cmd_simulate(const RunConfig& config, const std::string& out_dir);

/// Full two-stage fit: model.json (archive), stage1_model.json (when demand
/// is available), trajectories_reduced.csv, trajectories_structural.csv/.json,
/// report.json, run_config.json. A panel without demand skips the budget
/// stage with a warning on stderr and a flag in the report.
void cmd_fit(const RunConfig& config, const std::string& out_dir);

/// Fit every candidate family and tabulate: comparison.csv, comparison.txt
/// (best-AIC row marked '*'), run_config.json.
void cmd_compare(const RunConfig& config, const std::string& out_dir);

/// Evaluate trajectories from a fitted-model archive: trajectories.csv,
/// trajectories.json, run_config.json. Names may be model coefficients
/// (estimate + se) or structural quantities (masked points carry reason
/// codes); unknown names list the available ones.
void cmd_trajectories(const RunConfig& config, const std::string& out_dir);

/**
 * @brief Parse arguments, dispatch, and map failures to stable exit codes:
 * 0 success, 1 numerical/fit failure, 2 usage or schema error.
 *
 * Flags override config-file values; diagnostics go to stderr.
 */
int run(int argc, const char* const* argv);

}  // namespace seatvc::cli
