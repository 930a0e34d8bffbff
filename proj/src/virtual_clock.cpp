#include "cobridge/virtual_clock.hpp"

namespace cobridge {

void VirtualClock::schedule(Duration at, Action action) {
    actions_.emplace(std::make_pair(at.nanos(), next_id_++), std::move(action));
}

void VirtualClock::advance_to(Duration t) {
    if (t > now_) now_ = t;
    fire_due();
}

bool VirtualClock::advance_to_next(Duration limit) {
    if (actions_.empty()) return false;
    const std::int64_t next = actions_.begin()->first.first;
    if (next > limit.nanos()) return false;
    if (next > now_.nanos()) now_ = Duration(next);
    fire_due();
    return true;
}

std::optional<Duration> VirtualClock::next_instant() const {
    if (actions_.empty()) return std::nullopt;
    return Duration(actions_.begin()->first.first);
}

void VirtualClock::fire_due() {
    // Actions may schedule more actions; re-check the head each time.
    while (!actions_.empty() && actions_.begin()->first.first <= now_.nanos()) {
        auto node = actions_.extract(actions_.begin());
        node.mapped()();
    }
}

}  // namespace cobridge
