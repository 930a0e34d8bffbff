#include "cobridge/base64.hpp"
#include "cobridge/broker.hpp"
#include "cobridge/error.hpp"
#include "cobridge/tcp_broker.hpp"

#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <random>
#include <thread>

using namespace cobridge;
using namespace std::chrono_literals;

namespace {

std::vector<Envelope> drain(Subscription& sub, std::size_t expected) {
    std::vector<Envelope> out;
    const auto until = std::chrono::steady_clock::now() + 5s;
    while (out.size() < expected && std::chrono::steady_clock::now() < until) {
        for (auto& e : sub.poll(1000, Duration::from_millis(50))) out.push_back(std::move(e));
    }
    for (auto& e : sub.poll(1000, Duration::zero())) out.push_back(std::move(e));
    return out;
}

// A connection speaking the wire protocol directly.
class RawClient {
public:
    explicit RawClient(std::uint16_t port) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) throw std::runtime_error("connect");
    }
    ~RawClient() { ::close(fd_); }
    void send_line(const std::string& line) {
        const std::string framed = line + "\n";
        ASSERT_EQ(::send(fd_, framed.data(), framed.size(), MSG_NOSIGNAL), static_cast<ssize_t>(framed.size()));
    }
    std::string read_line() {
        for (;;) {
            if (auto nl = buf_.find('\n'); nl != std::string::npos) {
                std::string line = buf_.substr(0, nl);
                buf_.erase(0, nl + 1);
                return line;
            }
            char chunk[4096];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n <= 0) return {};
            buf_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    int fd_ = -1;
    std::string buf_;
};

}  // namespace

TEST(InMemoryBroker, SingleSubscriberFifo) {
    InMemoryBroker b;
    auto sub = b.subscribe("k");
    b.publish({"k", "one"});
    auto got = sub->poll(10, Duration::zero());
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].payload, "one");
}

TEST(InMemoryBroker, PollExamples) {
    InMemoryBroker b;
    auto sub = b.subscribe("k");
    EXPECT_TRUE(sub->poll(5, Duration::zero()).empty());
    for (const char* p : {"a", "b", "c"}) b.publish({"k", p});
    auto got = sub->poll(2, Duration::zero());
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0].payload, "a");
    EXPECT_EQ(got[1].payload, "b");
    EXPECT_EQ(sub->pending(), 1u);
    EXPECT_THROW(sub->poll(0, Duration::zero()), UsageError);
}

TEST(InMemoryBroker, ExactKeyMatching) {
    InMemoryBroker b;
    auto a = b.subscribe("data");
    auto c = b.subscribe("data.x");
    b.publish({"data", "1"});
    EXPECT_EQ(a->poll(10, Duration::zero()).size(), 1u);
    EXPECT_TRUE(c->poll(10, Duration::zero()).empty());
}

TEST(InMemoryBroker, LateSubscriberGetsBacklogUpToCap) {
    InMemoryBroker b(BrokerOptions{kDefaultMaxFrame, 3});
    for (int i = 0; i < 5; ++i) b.publish({"k", std::to_string(i)});
    EXPECT_EQ(b.backlog_evicted(), 2u);
    auto sub = b.subscribe("k");
    auto got = sub->poll(10, Duration::zero());
    ASSERT_EQ(got.size(), 3u);
    EXPECT_EQ(got[0].payload, "2");
    EXPECT_EQ(got[2].payload, "4");
}

TEST(InMemoryBroker, RetentionCapDropsOldest) {
    InMemoryBroker b(BrokerOptions{kDefaultMaxFrame, 10});
    auto sub = b.subscribe("k");
    for (int i = 0; i < 25; ++i) b.publish({"k", std::to_string(i)});
    EXPECT_EQ(sub->evicted_total(), 15u);
    EXPECT_EQ(sub->delivered_total(), 25u);
    auto got = sub->poll(100, Duration::zero());
    ASSERT_EQ(got.size(), 10u);
    EXPECT_EQ(got.front().payload, "15");
}

TEST(InMemoryBroker, ClosedHandleErrors) {
    InMemoryBroker b;
    auto sub = b.subscribe("k");
    b.close();
    b.close();
    EXPECT_THROW(b.publish({"k", "x"}), TransportError);
    EXPECT_THROW(sub->poll(1, Duration::from_millis(10)), TransportError);
}

TEST(InMemoryBroker, CloseWakesBlockedPoller) {
    InMemoryBroker b;
    auto sub = b.subscribe("k");
    std::thread closer([&] {
        std::this_thread::sleep_for(20ms);
        b.close();
    });
    EXPECT_THROW(sub->poll(1, Duration::from_seconds(5)), TransportError);
    closer.join();
}

TEST(InMemoryBroker, FrameAndKeyLimits) {
    InMemoryBroker b(BrokerOptions{16, 10});
    EXPECT_THROW(b.publish({"k", std::string(17, 'x')}), TransportError);
    EXPECT_NO_THROW(b.publish({"k", std::string(16, 'x')}));
    EXPECT_THROW(b.publish({"", "x"}), TransportError);
    EXPECT_THROW(b.publish({"a\nb", "x"}), TransportError);
}

TEST(InMemoryBroker, PollWaitsForLatePublish) {
    InMemoryBroker b;
    auto sub = b.subscribe("k");
    std::thread pub([&] {
        std::this_thread::sleep_for(10ms);
        b.publish({"k", "late"});
    });
    const auto t0 = std::chrono::steady_clock::now();
    auto got = sub->poll(10, Duration::from_millis(50));
    const auto took = std::chrono::steady_clock::now() - t0;
    pub.join();
    ASSERT_EQ(got.size(), 1u);
    EXPECT_LT(took, 250ms);
}

TEST(InMemoryBroker, InterleavedPublishersKeepPerPublisherOrder) {
    for (int trial = 0; trial < 20; ++trial) {
        InMemoryBroker b;
        auto s1 = b.subscribe("k");
        auto s2 = b.subscribe("k");
        constexpr int kPer = 500;
        auto publisher = [&](char tag) {
            for (int i = 0; i < kPer; ++i) b.publish({"k", std::string(1, tag) + std::to_string(i)});
        };
        std::thread a(publisher, 'a'), c(publisher, 'c');
        a.join();
        c.join();
        for (auto* sub : {s1.get(), s2.get()}) {
            auto got = drain(*sub, 2 * kPer);
            ASSERT_EQ(got.size(), 2u * kPer);
            int next_a = 0, next_c = 0;
            for (const auto& e : got) {
                int& next = e.payload[0] == 'a' ? next_a : next_c;
                ASSERT_EQ(std::stoi(e.payload.substr(1)), next++);
            }
        }
    }
}

class TcpBrokerTest : public ::testing::Test {
protected:
    void SetUp() override {
        server_ = std::make_unique<TcpBrokerServer>(Endpoint{"127.0.0.1", 0});
        server_->start();
        ep_ = Endpoint{"127.0.0.1", server_->port()};
    }
    void TearDown() override { server_->stop(); }
    std::unique_ptr<TcpBrokerServer> server_;
    Endpoint ep_;
};

TEST_F(TcpBrokerTest, PubSubRoundTrip) {
    TcpBroker b(ep_);
    auto sub = b.subscribe("k");
    const std::string binary("\0\x01\xff{\"x\":1}\n", 11);
    b.publish({"k", binary});
    auto got = drain(*sub, 1);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].payload, binary);
    EXPECT_EQ(got[0].routing_key, "k");
    b.close();
    EXPECT_THROW(b.publish({"k", "x"}), TransportError);
}

TEST_F(TcpBrokerTest, EquivalentToInMemory) {
    std::mt19937 rng(5);
    std::vector<Envelope> script;
    for (int i = 0; i < 300; ++i) {
        const std::string key = rng() % 3 == 0 ? "b" : "a";
        script.push_back({key, "m" + std::to_string(i) + std::string(rng() % 50, 'z')});
    }
    auto collect = [&](Broker& broker) {
        auto sa = broker.subscribe("a");
        auto sb = broker.subscribe("b");
        for (const auto& e : script) broker.publish(e);
        std::size_t na = 0, nb = 0;
        for (const auto& e : script) (e.routing_key == "a" ? na : nb)++;
        return std::pair{drain(*sa, na), drain(*sb, nb)};
    };
    InMemoryBroker mem;
    TcpBroker tcp(ep_);
    EXPECT_EQ(collect(mem), collect(tcp));
}

TEST_F(TcpBrokerTest, PollTimingOverTcp) {
    TcpBroker b(ep_);
    auto sub = b.subscribe("k");
    std::thread pub([&] {
        std::this_thread::sleep_for(10ms);
        b.publish({"k", "late"});
    });
    const auto t0 = std::chrono::steady_clock::now();
    auto got = sub->poll(10, Duration::from_millis(50));
    const auto took = std::chrono::steady_clock::now() - t0;
    pub.join();
    EXPECT_EQ(got.size(), 1u);
    EXPECT_LT(took, 250ms);
}

TEST_F(TcpBrokerTest, WireProtocol) {
    RawClient sub(ep_.port);
    sub.send_line(R"({"op":"sub","key":"k"})");
    EXPECT_EQ(sub.read_line(), R"({"op":"ok"})");

    RawClient pub(ep_.port);
    pub.send_line(R"({"op":"pub","key":"k","payload":")" + base64_encode("hello") + R"("})");
    EXPECT_EQ(pub.read_line(), R"({"op":"ok"})");
    EXPECT_EQ(sub.read_line(), R"({"op":"msg","key":"k","payload":")" + base64_encode("hello") + R"("})");

    pub.send_line(R"({"op":"pub","key":"k","payload":"***"})");
    EXPECT_NE(pub.read_line().find(R"("op":"err")"), std::string::npos);
    pub.send_line("not json");
    EXPECT_NE(pub.read_line().find(R"("op":"err")"), std::string::npos);

    sub.send_line(R"({"op":"sub","key":"other"})");
    EXPECT_NE(sub.read_line().find("one subscription per connection"), std::string::npos);
}

TEST_F(TcpBrokerTest, OversizedFrameRejected) {
    TcpBroker b(ep_);
    EXPECT_THROW(b.publish({"k", std::string(kDefaultMaxFrame + 1, 'x')}), TransportError);
}

TEST(TcpBrokerServer, PortInUse) {
    TcpBrokerServer first(Endpoint{"127.0.0.1", 0});
    first.start();
    TcpBrokerServer second(Endpoint{"127.0.0.1", first.port()});
    EXPECT_THROW(second.start(), TransportError);
    first.stop();
    first.stop();
}

TEST(TcpBroker, UnreachableServer) {
    TcpBrokerServer probe(Endpoint{"127.0.0.1", 0});
    probe.start();
    const auto port = probe.port();
    probe.stop();
    EXPECT_THROW(TcpBroker(Endpoint{"127.0.0.1", port}), TransportError);
}

TEST(Endpoint, Parse) {
    const auto ep = parse_endpoint("localhost:8080");
    EXPECT_EQ(ep.host, "localhost");
    EXPECT_EQ(ep.port, 8080);
    EXPECT_THROW(parse_endpoint("localhost"), ParseError);
    EXPECT_THROW(parse_endpoint("h:99999"), ParseError);
}
