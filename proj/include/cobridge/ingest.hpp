#pragma once

#include "cobridge/broker.hpp"
#include "cobridge/incoming_queue.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cobridge {

/// Turns a wire envelope into a record. Throws DecodeError on bad payloads.
using RecordDecoder = std::function<TimestampedRecord(const Envelope&)>;

RecordDecoder default_decoder();

/// Pulls envelopes one at a time from `sub` into `q` until `stop(q)` holds or `deadline`
/// has elapsed. With a zero deadline it drains only what is already pending. Returns the
/// number of records offered. Transport and decode errors propagate.
std::size_t fill_unthreaded(IncomingQueue& q, Subscription& sub, const std::function<bool(const IncomingQueue&)>& stop,
                            Duration deadline, const RecordDecoder& decode = default_decoder());

/// Background activity that keeps moving envelopes from a subscription into a queue.
///
/// Errors raised while polling or decoding are kept on a side channel and handed to the
/// step thread through take_error(). Decode errors do not stop the thread; a closed
/// transport does.
class ConsumerThread {
public:
    ConsumerThread(IncomingQueue& q, Subscription& sub, RecordDecoder decode = default_decoder());
    ~ConsumerThread();

    ConsumerThread(const ConsumerThread&) = delete;
    ConsumerThread& operator=(const ConsumerThread&) = delete;

    /// Throws UsageError when already started.
    void start();
    /// Idempotent; returns after the thread has been joined.
    void shutdown();
    bool running() const noexcept { return running_.load(); }

    /// Oldest pending error, if any, removed from the side channel.
    std::exception_ptr take_error();

    /// Waits until every envelope delivered to the subscription so far has been processed.
    /// Returns false on timeout or when the thread has stopped with envelopes outstanding.
    bool wait_idle(Duration timeout);

    std::uint64_t processed() const noexcept { return processed_.load(); }

private:
    void loop();
    bool idle() const;

    IncomingQueue& queue_;
    Subscription& sub_;
    RecordDecoder decode_;
    std::thread thread_;
    std::atomic<bool> started_{false};
    std::atomic<bool> running_{false};
    std::atomic<bool> stop_{false};
    std::atomic<std::uint64_t> processed_{0};

    mutable std::mutex mu_;
    std::condition_variable progress_cv_;
    std::vector<std::exception_ptr> errors_;
};

}  // namespace cobridge
