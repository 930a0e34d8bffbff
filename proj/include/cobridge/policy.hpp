#pragma once

#include "cobridge/time.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

namespace cobridge {

/// How a bridge treats its current output while it is still within maxage.
enum class Policy {
    /// Keep the current output whenever it is within maxage, even if newer data is queued.
    V1Conservative,
    /// Move to the newest eligible data; fall back to the current output only when no
    /// eligible data is queued and it is still within maxage.
    V2MoveToLatest,
};

std::string_view to_string(Policy p) noexcept;
/// Accepts `v1`/`conservative` and `v2`/`move-to-latest` (case-sensitive).
Policy policy_from_string(std::string_view text);

struct Decision {
    enum class Kind { Hold, Advance, NeedData };

    Kind kind = Kind::NeedData;
    /// Advance only: position in `available` of the new output; equals consumed - 1.
    std::size_t index = 0;
    /// Advance only: records removed from the head of the queue.
    std::size_t consumed = 0;

    static constexpr Decision hold() { return {Kind::Hold, 0, 0}; }
    static constexpr Decision need_data() { return {Kind::NeedData, 0, 0}; }
    static constexpr Decision advance(std::size_t consumed) { return {Kind::Advance, consumed - 1, consumed}; }

    bool operator==(const Decision&) const = default;
};

/// Chooses the step's output.
///
/// `available` holds the data times of queued records, oldest first. Only the leading
/// records at or before `horizon` are eligible; later ones are never consumed. `current`
/// is the data time of the present output, if any. `lookahead` must be at least 1.
Decision select_output(std::span<const SimTime> available, std::optional<SimTime> current, SimTime horizon,
                       Policy policy, Duration maxage, std::size_t lookahead);

}  // namespace cobridge
