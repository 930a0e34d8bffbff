#pragma once

#include "cobridge/bridge.hpp"
#include "cobridge/monitor.hpp"
#include "cobridge/oracle.hpp"
#include "cobridge/replay.hpp"
#include "cobridge/tcp_broker.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cobridge {

enum class ClockMode { Wallclock, Virtual };
enum class TransportKind { Memory, Tcp };

std::string_view to_string(ClockMode m) noexcept;
std::string_view to_string(IngestMode m) noexcept;
std::string_view to_string(TransportKind t) noexcept;

/// Declarative description of one run.
struct Scenario {
    std::string name = "scenario";
    Duration step_size = Duration::from_millis(100);
    std::size_t n_steps = 10;
    /// Emulated work of the other units, spent before the bridge steps.
    Duration injected_delay;
    ClockMode clock_mode = ClockMode::Virtual;
    /// Default: the first step ends at the first record's data time (or at step_size if
    /// that would be negative).
    std::optional<SimTime> start_time;
    /// Data timestamp mapped to simulation time zero. Default: the synthetic generator's
    /// epoch, otherwise the first record's timestamp.
    std::optional<EpochNanos> epoch;
    TransportKind transport = TransportKind::Memory;
    /// Tcp only. Port 0 starts an in-process server on an ephemeral port.
    Endpoint broker{"127.0.0.1", 0};
    BridgeConfig bridge;
    ReplaySchedule replay;
    std::optional<MonitorConfig> monitor;
    std::uint64_t seed = 0;

    /// Throws ValidationError naming the offending key.
    void validate() const;
};

/// Monitor outputs computed during a step.
struct MonitorSample {
    std::uint64_t step = 0;
    double distance = 0.0;
    bool stop = false;
};

/// An input record the bridge published, with the step that published it.
struct OutboundRecord {
    std::uint64_t step = 0;
    TimestampedRecord record;
};

struct TraceSummary {
    std::size_t steps = 0;
    double mean_wall_us = 0.0;
    double max_wall_us = 0.0;
    double p50_wall_us = 0.0;
    double p99_wall_us = 0.0;
    std::uint64_t total_consumed = 0;
    std::uint64_t total_published = 0;
    std::uint64_t dropped = 0;
    std::uint64_t final_queue = 0;
    std::optional<std::uint64_t> last_out_seqno;
};

struct RunTrace {
    std::vector<StepReport> steps;
    /// Set when a step timed out; holds the 1-based index of that step.
    std::optional<std::uint64_t> timeout_step;
    std::string timeout_message;
    std::vector<MonitorSample> monitor;
    std::vector<OutboundRecord> outbound;

    TraceSummary summary() const;
};

/// Thrown when a unit fails for a reason other than a step timeout.
class RunAborted : public Error {
public:
    RunAborted(const std::string& message, RunTrace partial) : Error(message), partial_(std::move(partial)) {}
    const RunTrace& partial() const noexcept { return partial_; }

private:
    RunTrace partial_;
};

/// Resolved time base of a scenario: epoch, first step start, and the records it replays.
struct ScenarioPlan {
    std::vector<TimestampedRecord> records;
    EpochNanos epoch = 0;
    SimTime start;
};

ScenarioPlan plan(const Scenario& scenario);

/// Fixed-step Jacobi run: per step, outputs at t are read, inputs set, the injected delay
/// spent, then every unit stepped to t + h.
RunTrace run(const Scenario& scenario);

/// The oracle's view of a scenario. Only meaningful for Virtual mode.
oracle::Outcome oracle_for(const Scenario& scenario);

/// Percentile by nearest rank over `values` (need not be sorted). 0 for empty input.
double percentile(std::vector<double> values, double p);

}  // namespace cobridge
