#pragma once

#include "cobridge/time.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <utility>

namespace cobridge {

/// Logical time source for deterministic runs. Actions scheduled at an instant fire,
/// in scheduling order, when the clock is advanced past that instant. Nothing sleeps.
///
/// Not thread-safe; owned and driven by the stepping thread.
class VirtualClock {
public:
    using Action = std::function<void()>;

    Duration now() const noexcept { return now_; }

    /// Registers `action` at `at`. Instants already in the past fire on the next advance.
    void schedule(Duration at, Action action);

    /// Moves the clock to `t` (never backwards) and fires everything due.
    void advance_to(Duration t);

    /// Jumps to the earliest pending instant if it is at or before `limit` and fires every
    /// action due at it. Returns false, leaving the clock untouched, when nothing qualifies.
    bool advance_to_next(Duration limit);

    std::size_t pending() const noexcept { return actions_.size(); }
    std::optional<Duration> next_instant() const;

private:
    void fire_due();

    Duration now_{};
    std::uint64_t next_id_ = 0;
    std::map<std::pair<std::int64_t, std::uint64_t>, Action> actions_;
};

}  // namespace cobridge
