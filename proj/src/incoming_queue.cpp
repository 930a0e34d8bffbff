#include "cobridge/incoming_queue.hpp"

#include "cobridge/error.hpp"

#include <spdlog/spdlog.h>

namespace cobridge {

IncomingQueue::IncomingQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw UsageError("queue capacity must be positive");
}

OfferResult IncomingQueue::offer(TimestampedRecord rec) {
    OfferResult result = OfferResult::Accepted;
    {
        std::lock_guard lock(mu_);
        offered_.fetch_add(1);
        if (last_accepted_ && rec.data_ts < *last_accepted_) {
            rejected_.fetch_add(1);
            spdlog::warn("rejected out-of-order record seqno={} at {} (newest accepted {})", rec.seqno,
                         format_timestamp(rec.data_ts), format_timestamp(*last_accepted_));
            result = OfferResult::RejectedOutOfOrder;
        } else {
            last_accepted_ = rec.data_ts;
            items_.push_back(std::move(rec));
            if (items_.size() > capacity_) {
                items_.pop_front();
                dropped_.fetch_add(1);
                result = OfferResult::DroppedOldest;
            }
        }
    }
    offered_cv_.notify_all();
    return result;
}

std::size_t IncomingQueue::size() const {
    std::lock_guard lock(mu_);
    return items_.size();
}

std::optional<EpochNanos> IncomingQueue::back_timestamp() const {
    std::lock_guard lock(mu_);
    if (items_.empty()) return std::nullopt;
    return items_.back().data_ts;
}

std::size_t IncomingQueue::count_at_or_before(EpochNanos horizon, std::size_t limit) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& r : items_) {
        if (n >= limit || r.data_ts > horizon) break;
        ++n;
    }
    return n;
}

std::vector<TimestampedRecord> IncomingQueue::contents() const {
    std::lock_guard lock(mu_);
    return {items_.begin(), items_.end()};
}

void IncomingQueue::wait_for_offer(std::uint64_t seen, Duration wait) const {
    std::unique_lock lock(mu_);
    offered_cv_.wait_for(lock, wait.chrono(), [&] { return offered_.load() != seen; });
}

TimestampedRecord IncomingQueue::LockedView::consume(std::size_t n) {
    auto& items = q_->items_;
    if (n == 0 || n > items.size()) throw UsageError("consume: count out of range");
    for (std::size_t i = 1; i < n; ++i) items.pop_front();
    TimestampedRecord last = std::move(items.front());
    items.pop_front();
    return last;
}

}  // namespace cobridge
