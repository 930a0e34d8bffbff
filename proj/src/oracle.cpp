#include "cobridge/oracle.hpp"

#include <limits>

namespace cobridge::oracle {

Choice decide(const std::vector<std::int64_t>& queued_ns, std::optional<std::int64_t> current_ns,
              std::int64_t horizon_ns, const Params& params) {
    std::vector<std::int64_t> eligible;
    for (std::int64_t t : queued_ns) {
        if (t <= horizon_ns) eligible.push_back(t);
    }
    const bool within_maxage = current_ns.has_value() && *current_ns + params.maxage_ns >= horizon_ns;
    const std::size_t take = eligible.size() < params.lookahead ? eligible.size() : params.lookahead;

    if (params.policy == Policy::V1Conservative) {
        if (within_maxage) return {Verdict::Hold, 0};
        if (take > 0) return {Verdict::Advance, take};
        return {Verdict::NeedData, 0};
    }
    if (take > 0) return {Verdict::Advance, take};
    if (within_maxage) return {Verdict::Hold, 0};
    return {Verdict::NeedData, 0};
}

Outcome outputs(const std::vector<Record>& records, const Schedule& schedule, const Params& params) {
    Outcome result;
    std::vector<bool> consumed(records.size(), false);
    std::int64_t now = 0;
    std::optional<std::size_t> current;

    for (std::size_t k = 1; k <= schedule.n_steps; ++k) {
        const std::int64_t t_end = schedule.start_ns + static_cast<std::int64_t>(k) * schedule.step_ns;
        now += schedule.delay_ns;

        std::optional<std::int64_t> wait_deadline;
        for (;;) {
            // The queue: every available record that has not been consumed, in order.
            std::vector<std::size_t> queue;
            for (std::size_t i = 0; i < records.size(); ++i) {
                if (!consumed[i] && records[i].available_ns <= now) queue.push_back(i);
            }
            std::vector<std::int64_t> times;
            for (std::size_t i : queue) times.push_back(records[i].time_ns);

            const std::optional<std::int64_t> cur_t =
                current ? std::optional<std::int64_t>(records[*current].time_ns) : std::nullopt;
            const Choice c = decide(times, cur_t, t_end, params);

            if (c.verdict == Verdict::Advance) {
                // Eligible records lead the queue because records are time-sorted.
                for (std::size_t j = 0; j < c.consumed; ++j) consumed[queue[j]] = true;
                current = queue[c.consumed - 1];
                result.steps.push_back({k, t_end, records[*current].seqno, records[*current].time_ns, false, c.consumed});
                break;
            }
            if (c.verdict == Verdict::Hold) {
                result.steps.push_back({k, t_end, records[*current].seqno, records[*current].time_ns, true, 0});
                break;
            }

            if (!wait_deadline) wait_deadline = now + schedule.timeout_ns;
            std::int64_t next = std::numeric_limits<std::int64_t>::max();
            for (const auto& r : records) {
                if (r.available_ns > now && r.available_ns < next) next = r.available_ns;
            }
            if (next > *wait_deadline) {
                result.timeout_step = k;
                return result;
            }
            now = next;
        }
    }
    return result;
}

}  // namespace cobridge::oracle
