#pragma once

#include "cobridge/broker.hpp"

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>

namespace cobridge {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 5673;

    std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Parses `host:port`. Throws ParseError.
Endpoint parse_endpoint(std::string_view text);

/// Line-oriented TCP broker. Each frame is one line of UTF-8 JSON:
///
///   client -> server  {"op":"pub","key":K,"payload":B64}   {"op":"sub","key":K}
///   server -> client  {"op":"msg","key":K,"payload":B64}   {"op":"ok"}   {"op":"err","reason":R}
///
/// A connection that sent `sub` becomes a one-way message stream for that key.
class TcpBrokerServer {
public:
    explicit TcpBrokerServer(Endpoint endpoint, BrokerOptions options = {});
    ~TcpBrokerServer();

    TcpBrokerServer(const TcpBrokerServer&) = delete;
    TcpBrokerServer& operator=(const TcpBrokerServer&) = delete;

    /// Binds and starts accepting. Throws TransportError when the address cannot be bound.
    void start();
    /// Idempotent; closes every connection and joins all threads.
    void stop();

    /// Bound port; differs from the requested one when port 0 was asked for.
    std::uint16_t port() const noexcept { return bound_port_; }
    const Endpoint& endpoint() const noexcept { return endpoint_; }

private:
    struct Connection;

    void accept_loop();
    void serve(Connection& conn);

    Endpoint endpoint_;
    BrokerOptions options_;
    InMemoryBroker core_;
    int listen_fd_ = -1;
    std::uint16_t bound_port_ = 0;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex conns_mu_;
    std::list<std::unique_ptr<Connection>> conns_;
};

/// Client handle for TcpBrokerServer. Publishing is synchronous: publish() returns after
/// the server's `ok`. Each subscription uses its own connection.
class TcpBroker final : public Broker {
public:
    /// Connects the publishing connection. Throws TransportError if unreachable.
    explicit TcpBroker(Endpoint endpoint, BrokerOptions options = {});
    ~TcpBroker() override;

    void publish(const Envelope& env) override;
    std::unique_ptr<Subscription> subscribe(const std::string& routing_key) override;
    void close() override;
    bool is_open() const noexcept override { return open_.load(); }

    struct SubscriptionState;

private:
    Endpoint endpoint_;
    BrokerOptions options_;
    std::atomic<bool> open_{true};
    std::mutex pub_mu_;
    int pub_fd_ = -1;
    std::string pub_buffer_;
    std::mutex subs_mu_;
    std::list<std::weak_ptr<SubscriptionState>> subs_;
};

}  // namespace cobridge
