#pragma once

#include "cobridge/time.hpp"

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace cobridge {

inline constexpr std::size_t kDefaultMaxFrame = 1 << 20;
inline constexpr std::size_t kDefaultRetentionCap = 100'000;

struct Envelope {
    std::string routing_key;
    std::string payload;

    bool operator==(const Envelope&) const = default;
};

/// Throws TransportError unless `key` is non-empty and free of control characters.
void validate_routing_key(std::string_view key);

struct BrokerOptions {
    std::size_t max_frame = kDefaultMaxFrame;
    /// Per-subscription backlog limit; overflow evicts the oldest envelope.
    std::size_t retention_cap = kDefaultRetentionCap;
};

/// FIFO of envelopes delivered to one subscriber. Thread-safe; the broker side pushes,
/// a single consumer polls.
class EnvelopeQueue {
public:
    explicit EnvelopeQueue(std::size_t cap) : cap_(cap) {}

    void push(Envelope env);
    /// Returns up to `max_count` envelopes, waiting at most `deadline` for the first.
    /// Throws TransportError once closed and drained.
    std::vector<Envelope> pop(std::size_t max_count, Duration deadline);
    void close();

    std::size_t size() const;
    std::uint64_t delivered_total() const noexcept { return delivered_.load(); }
    std::uint64_t evicted_total() const noexcept { return evicted_.load(); }

private:
    const std::size_t cap_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Envelope> items_;
    bool closed_ = false;
    std::atomic<std::uint64_t> delivered_{0};
    std::atomic<std::uint64_t> evicted_{0};
};

/// Receiving end of one routing key. Consumed by one thread at a time.
class Subscription {
public:
    virtual ~Subscription() = default;

    /// Returns pending envelopes immediately if any; otherwise blocks until one arrives or
    /// `deadline` elapses (empty result). `max_count` must be at least 1.
    virtual std::vector<Envelope> poll(std::size_t max_count, Duration deadline) = 0;

    virtual const std::string& routing_key() const noexcept = 0;
    /// Envelopes ever handed to this subscription, including evicted ones.
    virtual std::uint64_t delivered_total() const noexcept = 0;
    /// Envelopes dropped because the retention cap was exceeded.
    virtual std::uint64_t evicted_total() const noexcept = 0;
    virtual std::size_t pending() const = 0;
};

/// Connection to a publish/subscribe message plane.
class Broker {
public:
    virtual ~Broker() = default;

    /// Returns once the broker has accepted the envelope. Throws TransportError on a closed
    /// handle or a payload above the frame limit.
    virtual void publish(const Envelope& env) = 0;
    virtual std::unique_ptr<Subscription> subscribe(const std::string& routing_key) = 0;
    /// Idempotent. Wakes blocked pollers with TransportError.
    virtual void close() = 0;
    virtual bool is_open() const noexcept = 0;
};

/// Process-local broker with exact-string topic matching.
///
/// Envelopes published to a key without subscribers are retained (up to the cap) and
/// handed to the first subscription created for that key.
class InMemoryBroker final : public Broker {
public:
    explicit InMemoryBroker(BrokerOptions options = {});
    ~InMemoryBroker() override;

    void publish(const Envelope& env) override;
    std::unique_ptr<Subscription> subscribe(const std::string& routing_key) override;
    void close() override;
    bool is_open() const noexcept override { return open_.load(); }

    /// Envelopes dropped from the no-subscriber backlog due to the cap.
    std::uint64_t backlog_evicted() const noexcept { return backlog_evicted_.load(); }

private:
    BrokerOptions options_;
    std::atomic<bool> open_{true};
    mutable std::mutex mu_;
    std::map<std::string, std::vector<std::weak_ptr<EnvelopeQueue>>, std::less<>> subscribers_;
    std::map<std::string, std::deque<Envelope>, std::less<>> backlog_;
    std::atomic<std::uint64_t> backlog_evicted_{0};
};

}  // namespace cobridge
