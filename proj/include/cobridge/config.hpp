#pragma once

#include "cobridge/orchestrator.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cobridge {

/// Scenario file (YAML). Durations carry unit suffixes (`2ms`, `0.2s`). Unknown keys are
/// rejected. Relative CSV paths resolve against `base_dir`. Throws ValidationError or
/// ParseError naming the key.
Scenario parse_scenario(std::string_view yaml_text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

/// Guideline lints; empty when the configuration is coherent.
std::vector<std::string> validate_config(const Scenario& scenario);

/// One enumerated cell of an experiment grid.
struct GridCell {
    std::size_t index = 0;
    /// Grid parameter -> value text, for every swept parameter.
    std::map<std::string, std::string> params;
    Scenario scenario;
};

inline constexpr std::size_t kDefaultGridCap = 256;

/// Base scenario plus value lists; the cross product is enumerated with the last listed
/// parameter varying fastest.
struct ExperimentGrid {
    Scenario base;
    std::vector<std::pair<std::string, std::vector<std::string>>> axes;
    std::size_t cap = kDefaultGridCap;

    std::size_t size() const;
    /// Throws ValidationError when the grid exceeds `cap` or a value does not apply.
    std::vector<GridCell> cells() const;
};

ExperimentGrid parse_grid(std::string_view yaml_text, const std::string& base_dir = ".");
ExperimentGrid load_grid(const std::string& path);

/// Applies one grid parameter (`maxage`, `lookahead`, `policy`, `ingest_mode`, `step_size`,
/// `injected_delay`, `data_spacing`, `wall_period`) to a scenario.
void apply_grid_param(Scenario& scenario, const std::string& name, const std::string& value);

inline constexpr std::string_view kTraceHeader =
    "step,sim_time_ns,wall_us,consumed,queue_exit,out_seqno,out_ts_ns,held,published,dropped";
inline constexpr std::string_view kOracleHeader = "step,sim_time_ns,out_seqno,out_ts_ns,held";

void write_trace_csv(std::ostream& out, const RunTrace& trace);
void write_oracle_csv(std::ostream& out, const oracle::Outcome& outcome);
void write_summary(std::ostream& out, const RunTrace& trace);

/// Columns shared by the trace and oracle CSVs, in oracle order, for diffing the two.
std::string project_trace_for_oracle(const RunTrace& trace);

}  // namespace cobridge
