#pragma once

// Reference model of the bridge's per-step output, written as a direct scan over all
// records. It has no queues, threads or clocks and deliberately shares no logic with
// BridgeUnit or select_output; tests compare the two.

#include "cobridge/policy.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace cobridge::oracle {

struct Record {
    std::uint64_t seqno = 0;
    /// Data time on the simulation axis, ns.
    std::int64_t time_ns = 0;
    /// Logical instant at which the record becomes available to the bridge, ns.
    std::int64_t available_ns = 0;
};

struct Schedule {
    std::int64_t start_ns = 0;
    std::int64_t step_ns = 0;
    std::size_t n_steps = 0;
    /// Logical time spent before the bridge steps, every step.
    std::int64_t delay_ns = 0;
    std::int64_t timeout_ns = 0;
};

struct Params {
    Policy policy = Policy::V2MoveToLatest;
    std::int64_t maxage_ns = 0;
    std::size_t lookahead = 1;
};

struct Step {
    std::uint64_t step = 0;
    std::int64_t sim_time_end_ns = 0;
    std::uint64_t out_seqno = 0;
    std::int64_t out_ts_ns = 0;
    bool held = false;
    std::uint64_t consumed = 0;

    bool operator==(const Step&) const = default;
};

struct Outcome {
    std::vector<Step> steps;
    /// 1-based index of the step that timed out, if the run stopped early.
    std::optional<std::uint64_t> timeout_step;
};

/// Runs the output policy over `records` (sorted by time) for every step in `schedule`.
Outcome outputs(const std::vector<Record>& records, const Schedule& schedule, const Params& params);

enum class Verdict { Hold, Advance, NeedData };

struct Choice {
    Verdict verdict = Verdict::NeedData;
    std::size_t consumed = 0;

    bool operator==(const Choice&) const = default;
};

/// Single decision over queued record times (oldest first) for a step ending at `horizon_ns`.
Choice decide(const std::vector<std::int64_t>& queued_ns, std::optional<std::int64_t> current_ns,
              std::int64_t horizon_ns, const Params& params);

}  // namespace cobridge::oracle
