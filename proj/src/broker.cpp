#include "cobridge/broker.hpp"

#include "cobridge/error.hpp"

#include <algorithm>

namespace cobridge {

void validate_routing_key(std::string_view key) {
    if (key.empty()) throw TransportError("routing key must not be empty");
    for (unsigned char c : key) {
        if (c < 0x20 || c == 0x7f) throw TransportError("routing key contains a control character");
    }
}

void EnvelopeQueue::push(Envelope env) {
    {
        std::lock_guard lock(mu_);
        if (closed_) return;
        items_.push_back(std::move(env));
        if (items_.size() > cap_) {
            items_.pop_front();
            evicted_.fetch_add(1);
        }
        delivered_.fetch_add(1);
    }
    cv_.notify_one();
}

std::vector<Envelope> EnvelopeQueue::pop(std::size_t max_count, Duration deadline) {
    if (max_count == 0) throw UsageError("poll: max_count must be at least 1");
    std::unique_lock lock(mu_);
    if (items_.empty() && !closed_ && !deadline.is_zero()) {
        cv_.wait_for(lock, deadline.chrono(), [this] { return !items_.empty() || closed_; });
    }
    if (items_.empty() && closed_) throw TransportError("subscription closed");
    std::vector<Envelope> out;
    const std::size_t n = std::min(max_count, items_.size());
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(std::move(items_.front()));
        items_.pop_front();
    }
    return out;
}

void EnvelopeQueue::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

std::size_t EnvelopeQueue::size() const {
    std::lock_guard lock(mu_);
    return items_.size();
}

namespace {

class InMemorySubscription final : public Subscription {
public:
    InMemorySubscription(std::string key, std::shared_ptr<EnvelopeQueue> queue)
        : key_(std::move(key)), queue_(std::move(queue)) {}

    std::vector<Envelope> poll(std::size_t max_count, Duration deadline) override {
        return queue_->pop(max_count, deadline);
    }
    const std::string& routing_key() const noexcept override { return key_; }
    std::uint64_t delivered_total() const noexcept override { return queue_->delivered_total(); }
    std::uint64_t evicted_total() const noexcept override { return queue_->evicted_total(); }
    std::size_t pending() const override { return queue_->size(); }

private:
    std::string key_;
    std::shared_ptr<EnvelopeQueue> queue_;
};

}  // namespace

InMemoryBroker::InMemoryBroker(BrokerOptions options) : options_(options) {}

InMemoryBroker::~InMemoryBroker() { close(); }

void InMemoryBroker::publish(const Envelope& env) {
    if (!open_.load()) throw TransportError("publish on closed broker handle");
    validate_routing_key(env.routing_key);
    if (env.payload.size() > options_.max_frame) {
        throw TransportError("payload of " + std::to_string(env.payload.size()) + " bytes exceeds max frame " +
                             std::to_string(options_.max_frame));
    }

    std::lock_guard lock(mu_);
    auto it = subscribers_.find(env.routing_key);
    bool delivered = false;
    if (it != subscribers_.end()) {
        auto& subs = it->second;
        std::erase_if(subs, [](const auto& w) { return w.expired(); });
        for (const auto& weak : subs) {
            if (auto q = weak.lock()) {
                q->push(env);
                delivered = true;
            }
        }
    }
    if (!delivered) {
        auto& backlog = backlog_[env.routing_key];
        backlog.push_back(env);
        if (backlog.size() > options_.retention_cap) {
            backlog.pop_front();
            backlog_evicted_.fetch_add(1);
        }
    }
}

std::unique_ptr<Subscription> InMemoryBroker::subscribe(const std::string& routing_key) {
    if (!open_.load()) throw TransportError("subscribe on closed broker handle");
    validate_routing_key(routing_key);
    auto queue = std::make_shared<EnvelopeQueue>(options_.retention_cap);

    std::lock_guard lock(mu_);
    if (auto b = backlog_.find(routing_key); b != backlog_.end()) {
        for (auto& env : b->second) queue->push(std::move(env));
        backlog_.erase(b);
    }
    subscribers_[routing_key].push_back(queue);
    return std::make_unique<InMemorySubscription>(routing_key, std::move(queue));
}

void InMemoryBroker::close() {
    if (!open_.exchange(false)) return;
    std::lock_guard lock(mu_);
    for (auto& [key, subs] : subscribers_) {
        for (const auto& weak : subs) {
            if (auto q = weak.lock()) q->close();
        }
    }
    subscribers_.clear();
    backlog_.clear();
}

}  // namespace cobridge
