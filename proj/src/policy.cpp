#include "cobridge/policy.hpp"

#include "cobridge/error.hpp"

#include <string>

namespace cobridge {

std::string_view to_string(Policy p) noexcept {
    return p == Policy::V1Conservative ? "v1" : "v2";
}

Policy policy_from_string(std::string_view text) {
    if (text == "v1" || text == "V1" || text == "conservative") return Policy::V1Conservative;
    if (text == "v2" || text == "V2" || text == "move-to-latest") return Policy::V2MoveToLatest;
    throw ParseError("policy", "unknown policy '" + std::string(text) + "'");
}

Decision select_output(std::span<const SimTime> available, std::optional<SimTime> current, SimTime horizon,
                       Policy policy, Duration maxage, std::size_t lookahead) {
    if (lookahead == 0) throw UsageError("lookahead must be at least 1");

    // Eligible records form a prefix because `available` is time-ordered.
    std::size_t eligible = 0;
    while (eligible < available.size() && eligible < lookahead && available[eligible] <= horizon) ++eligible;

    const bool fresh = current && *current + maxage >= horizon;

    if (policy == Policy::V1Conservative && fresh) return Decision::hold();
    if (eligible > 0) return Decision::advance(eligible);
    if (fresh) return Decision::hold();
    return Decision::need_data();
}

}  // namespace cobridge
