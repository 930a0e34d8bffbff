#pragma once

#include "cobridge/record.hpp"
#include "cobridge/time.hpp"

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <vector>

namespace cobridge {

inline constexpr std::size_t kDefaultQueueCapacity = 100'000;

enum class OfferResult { Accepted, DroppedOldest, RejectedOutOfOrder };

enum class IngestMode { Unthreaded, Threaded };

/// Bounded buffer of decoded records held in non-decreasing timestamp order.
///
/// Overflow evicts the oldest record. A record older than the newest one ever accepted is
/// rejected. Safe for one producer thread and one consumer thread.
class IncomingQueue {
public:
    explicit IncomingQueue(std::size_t capacity = kDefaultQueueCapacity);

    OfferResult offer(TimestampedRecord rec);

    std::size_t size() const;
    std::size_t capacity() const noexcept { return capacity_; }
    std::uint64_t dropped_count() const noexcept { return dropped_.load(); }
    std::uint64_t rejected_count() const noexcept { return rejected_.load(); }
    std::uint64_t offered_count() const noexcept { return offered_.load(); }

    /// Timestamp of the newest buffered record.
    std::optional<EpochNanos> back_timestamp() const;
    /// Number of leading records with timestamp <= `horizon`, scanning at most `limit`.
    std::size_t count_at_or_before(EpochNanos horizon, std::size_t limit) const;
    /// Copy of the buffered records, oldest first.
    std::vector<TimestampedRecord> contents() const;

    /// Blocks until offered_count() differs from `seen` or `wait` elapses.
    void wait_for_offer(std::uint64_t seen, Duration wait) const;

    /// Exclusive access for a select-then-consume sequence. The producer blocks while a
    /// view is alive, so evictions cannot shift the records being inspected.
    class LockedView {
    public:
        std::size_t size() const noexcept { return q_->items_.size(); }
        const TimestampedRecord& operator[](std::size_t i) const { return q_->items_[i]; }
        /// Removes the first `n` records and returns the last one removed.
        TimestampedRecord consume(std::size_t n);

    private:
        friend class IncomingQueue;
        LockedView(IncomingQueue& q) : q_(&q), lock_(q.mu_) {}
        IncomingQueue* q_;
        std::unique_lock<std::mutex> lock_;
    };

    LockedView lock() { return LockedView(*this); }

private:
    const std::size_t capacity_;
    mutable std::mutex mu_;
    mutable std::condition_variable offered_cv_;
    std::deque<TimestampedRecord> items_;
    std::optional<EpochNanos> last_accepted_;
    std::atomic<std::uint64_t> dropped_{0};
    std::atomic<std::uint64_t> rejected_{0};
    std::atomic<std::uint64_t> offered_{0};
};

}  // namespace cobridge
