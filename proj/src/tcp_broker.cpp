#include "cobridge/tcp_broker.hpp"

#include "cobridge/base64.hpp"
#include "cobridge/error.hpp"

#include <json.hpp>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <optional>

namespace cobridge {

namespace {

using ojson = nlohmann::ordered_json;

// Base64 inflates by 4/3; leave room for the JSON wrapper and key.
std::size_t max_line_for(std::size_t max_frame) { return max_frame / 3 * 4 + 4096 + 64 * 1024; }

void close_fd(int& fd) {
    if (fd >= 0) {
        ::close(fd);
        fd = -1;
    }
}

void send_all(int fd, std::string_view data) {
    while (!data.empty()) {
        const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("send failed: ") + std::strerror(errno));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void send_frame(int fd, const ojson& frame) { send_all(fd, frame.dump() + "\n"); }

/// Reads newline-terminated frames. Returns nullopt on orderly EOF.
std::optional<std::string> read_line(int fd, std::string& buffer, std::size_t max_line) {
    for (;;) {
        if (const auto nl = buffer.find('\n'); nl != std::string::npos) {
            std::string line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            return line;
        }
        if (buffer.size() > max_line) throw TransportError("frame exceeds maximum size");
        char chunk[16384];
        const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n == 0) return std::nullopt;
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("recv failed: ") + std::strerror(errno));
        }
        buffer.append(chunk, static_cast<std::size_t>(n));
    }
}

int connect_to(const Endpoint& ep) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(ep.port);
    if (const int rc = ::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw TransportError("cannot resolve " + ep.to_string() + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    int last_errno = 0;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        last_errno = errno;
        close_fd(fd);
    }
    ::freeaddrinfo(res);
    if (fd < 0) {
        throw TransportError("cannot connect to " + ep.to_string() + ": " + std::strerror(last_errno));
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
}

ojson parse_frame(const std::string& line) {
    ojson frame = ojson::parse(line, nullptr, false);
    if (frame.is_discarded() || !frame.is_object() || !frame.contains("op") || !frame["op"].is_string()) {
        throw TransportError("malformed frame");
    }
    return frame;
}

std::string string_field(const ojson& frame, const char* name) {
    const auto it = frame.find(name);
    if (it == frame.end() || !it->is_string()) throw TransportError(std::string("frame lacks string field ") + name);
    return it->get<std::string>();
}

ojson ok_frame() { return ojson{{"op", "ok"}}; }
ojson err_frame(const std::string& reason) { return ojson{{"op", "err"}, {"reason", reason}}; }

/// Waits for the server's reply to a request; returns normally on `ok`.
void expect_ok(int fd, std::string& buffer, std::size_t max_line) {
    const auto line = read_line(fd, buffer, max_line);
    if (!line) throw TransportError("connection closed by broker");
    const ojson reply = parse_frame(*line);
    const std::string op = reply["op"].get<std::string>();
    if (op == "ok") return;
    if (op == "err") throw TransportError("broker error: " + string_field(reply, "reason"));
    throw TransportError("unexpected reply op '" + op + "'");
}

}  // namespace

Endpoint parse_endpoint(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos || colon == 0) throw ParseError("broker", "expected host:port");
    const std::string_view port = text.substr(colon + 1);
    unsigned value = 0;
    auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
    if (ec != std::errc() || p != port.data() + port.size() || value > 65535) {
        throw ParseError("broker", "invalid port '" + std::string(port) + "'");
    }
    return Endpoint{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(value)};
}

// ---------------------------------------------------------------------------
// Server

struct TcpBrokerServer::Connection {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
};

TcpBrokerServer::TcpBrokerServer(Endpoint endpoint, BrokerOptions options)
    : endpoint_(std::move(endpoint)), options_(options), core_(options) {}

TcpBrokerServer::~TcpBrokerServer() { stop(); }

void TcpBrokerServer::start() {
    if (running_.load()) throw UsageError("server already started");

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(endpoint_.port);
    if (const int rc = ::getaddrinfo(endpoint_.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
        throw TransportError("cannot resolve " + endpoint_.to_string() + ": " + ::gai_strerror(rc));
    }
    int last_errno = 0;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        listen_fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (listen_fd_ < 0) continue;
        const int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(listen_fd_, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(listen_fd_, 64) == 0) break;
        last_errno = errno;
        close_fd(listen_fd_);
    }
    ::freeaddrinfo(res);
    if (listen_fd_ < 0) {
        throw TransportError("cannot bind " + endpoint_.to_string() + ": " + std::strerror(last_errno));
    }

    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    bound_port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                             : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);

    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
}

void TcpBrokerServer::stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    close_fd(listen_fd_);
    core_.close();

    std::list<std::unique_ptr<Connection>> conns;
    {
        std::lock_guard lock(conns_mu_);
        conns.swap(conns_);
    }
    for (auto& c : conns) ::shutdown(c->fd, SHUT_RDWR);
    for (auto& c : conns) {
        if (c->thread.joinable()) c->thread.join();
        close_fd(c->fd);
    }
}

void TcpBrokerServer::accept_loop() {
    while (running_.load()) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            return;
        }
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);

        std::lock_guard lock(conns_mu_);
        // Reap finished connections so long-running servers do not accumulate threads.
        for (auto it = conns_.begin(); it != conns_.end();) {
            if ((*it)->done.load()) {
                (*it)->thread.join();
                close_fd((*it)->fd);
                it = conns_.erase(it);
            } else {
                ++it;
            }
        }
        auto conn = std::make_unique<Connection>();
        conn->fd = fd;
        Connection& ref = *conn;
        conns_.push_back(std::move(conn));
        ref.thread = std::thread([this, &ref] {
            serve(ref);
            ref.done = true;
        });
    }
}

void TcpBrokerServer::serve(Connection& conn) {
    std::string buffer;
    const std::size_t max_line = max_line_for(options_.max_frame);
    try {
        for (;;) {
            const auto line = read_line(conn.fd, buffer, max_line);
            if (!line) return;
            if (line->empty()) continue;

            std::string op;
            std::string key;
            try {
                const ojson frame = parse_frame(*line);
                op = frame["op"].get<std::string>();
                key = string_field(frame, "key");
                if (op == "pub") {
                    core_.publish(Envelope{key, base64_decode(string_field(frame, "payload"))});
                    send_frame(conn.fd, ok_frame());
                    continue;
                }
                if (op != "sub") throw TransportError("unknown op '" + op + "'");
            } catch (const Error& e) {
                send_frame(conn.fd, err_frame(e.what()));
                continue;
            }

            std::unique_ptr<Subscription> sub;
            try {
                sub = core_.subscribe(key);
            } catch (const Error& e) {
                send_frame(conn.fd, err_frame(e.what()));
                continue;
            }
            send_frame(conn.fd, ok_frame());

            // Streaming phase: forward envelopes until either side goes away.
            for (;;) {
                std::vector<Envelope> batch;
                try {
                    batch = sub->poll(64, Duration::from_millis(50));
                } catch (const TransportError&) {
                    return;
                }
                for (const auto& env : batch) {
                    send_frame(conn.fd, ojson{{"op", "msg"}, {"key", env.routing_key},
                                              {"payload", base64_encode(env.payload)}});
                }
                pollfd p{conn.fd, POLLIN, 0};
                if (::poll(&p, 1, 0) > 0) {
                    char probe;
                    const ssize_t n = ::recv(conn.fd, &probe, 1, MSG_PEEK);
                    if (n <= 0) return;
                    send_frame(conn.fd, err_frame("one subscription per connection"));
                    return;
                }
            }
        }
    } catch (const Error&) {
        // Peer vanished or sent an oversized frame; drop the connection.
    }
}

// ---------------------------------------------------------------------------
// Client

struct TcpBroker::SubscriptionState {
    int fd = -1;
    EnvelopeQueue queue;
    std::thread reader;

    explicit SubscriptionState(std::size_t cap) : queue(cap) {}

    void shutdown() {
        if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
        queue.close();
    }

    ~SubscriptionState() {
        shutdown();
        if (reader.joinable()) reader.join();
        close_fd(fd);
    }
};

namespace {

class TcpSubscription final : public Subscription {
public:
    TcpSubscription(std::string key, std::shared_ptr<TcpBroker::SubscriptionState> state)
        : key_(std::move(key)), state_(std::move(state)) {}

    std::vector<Envelope> poll(std::size_t max_count, Duration deadline) override {
        return state_->queue.pop(max_count, deadline);
    }
    const std::string& routing_key() const noexcept override { return key_; }
    std::uint64_t delivered_total() const noexcept override { return state_->queue.delivered_total(); }
    std::uint64_t evicted_total() const noexcept override { return state_->queue.evicted_total(); }
    std::size_t pending() const override { return state_->queue.size(); }

private:
    std::string key_;
    std::shared_ptr<TcpBroker::SubscriptionState> state_;
};

}  // namespace

TcpBroker::TcpBroker(Endpoint endpoint, BrokerOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
    pub_fd_ = connect_to(endpoint_);
}

TcpBroker::~TcpBroker() { close(); }

void TcpBroker::publish(const Envelope& env) {
    if (!open_.load()) throw TransportError("publish on closed broker handle");
    validate_routing_key(env.routing_key);
    if (env.payload.size() > options_.max_frame) {
        throw TransportError("payload of " + std::to_string(env.payload.size()) + " bytes exceeds max frame " +
                             std::to_string(options_.max_frame));
    }
    std::lock_guard lock(pub_mu_);
    if (pub_fd_ < 0) throw TransportError("publish on closed broker handle");
    send_frame(pub_fd_, ojson{{"op", "pub"}, {"key", env.routing_key}, {"payload", base64_encode(env.payload)}});
    expect_ok(pub_fd_, pub_buffer_, max_line_for(options_.max_frame));
}

std::unique_ptr<Subscription> TcpBroker::subscribe(const std::string& routing_key) {
    if (!open_.load()) throw TransportError("subscribe on closed broker handle");
    validate_routing_key(routing_key);

    auto state = std::make_shared<SubscriptionState>(options_.retention_cap);
    state->fd = connect_to(endpoint_);
    std::string buffer;
    const std::size_t max_line = max_line_for(options_.max_frame);
    send_frame(state->fd, ojson{{"op", "sub"}, {"key", routing_key}});
    expect_ok(state->fd, buffer, max_line);

    SubscriptionState* raw = state.get();
    state->reader = std::thread([raw, buffer = std::move(buffer), max_line]() mutable {
        try {
            while (auto line = read_line(raw->fd, buffer, max_line)) {
                const ojson frame = parse_frame(*line);
                if (frame["op"] != "msg") continue;
                raw->queue.push(Envelope{string_field(frame, "key"), base64_decode(string_field(frame, "payload"))});
            }
        } catch (const Error&) {
        }
        raw->queue.close();
    });

    {
        std::lock_guard lock(subs_mu_);
        std::erase_if(subs_, [](const auto& w) { return w.expired(); });
        subs_.push_back(state);
    }
    return std::make_unique<TcpSubscription>(routing_key, std::move(state));
}

void TcpBroker::close() {
    if (!open_.exchange(false)) return;
    {
        std::lock_guard lock(pub_mu_);
        if (pub_fd_ >= 0) ::shutdown(pub_fd_, SHUT_RDWR);
        close_fd(pub_fd_);
    }
    std::lock_guard lock(subs_mu_);
    for (const auto& weak : subs_) {
        if (auto s = weak.lock()) s->shutdown();
    }
    subs_.clear();
}

}  // namespace cobridge
