#include "cobridge/bridge.hpp"
#include "cobridge/error.hpp"
#include "cobridge/oracle.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace cobridge;

namespace {

constexpr std::int64_t ms = 1'000'000;

BridgeConfig config(Policy p, IngestMode mode = IngestMode::Unthreaded) {
    BridgeConfig c;
    c.policy = p;
    c.ingest_mode = mode;
    c.variables = {{"value", ValueKind::Real, Direction::Output}};
    return c;
}

TimestampedRecord rec(std::uint64_t seq, std::int64_t ts_ns) {
    return {ts_ns, seq, {{"value", Value(static_cast<double>(seq) * 10.0)}}};
}

// Publishes record k of a gapless stream at k * period on the clock.
void schedule_gapless(InMemoryBroker& b, VirtualClock& clock, int count, std::int64_t period_ns) {
    for (int k = 1; k <= count; ++k) {
        clock.schedule(Duration(k * period_ns),
                       [&b, k, period_ns] { b.publish({"cobridge.data", encode_record(rec(k, k * period_ns))}); });
    }
}

std::vector<StepReport> run_steps(BridgeUnit& bridge, VirtualClock& clock, int n, std::int64_t step_ns,
                                  std::int64_t delay_ns) {
    std::vector<StepReport> out;
    SimTime t(0);
    for (int k = 0; k < n; ++k) {
        clock.advance_to(clock.now() + Duration(delay_ns));
        out.push_back(bridge.do_step(t, Duration(step_ns)));
        t = t + Duration(step_ns);
    }
    return out;
}

}  // namespace

TEST(Bridge, FirstStepWithoutDataTimesOut) {
    auto broker = std::make_shared<InMemoryBroker>();
    auto cfg = config(Policy::V2MoveToLatest);
    cfg.timeout = Duration::from_millis(10);
    BridgeUnit bridge(cfg, broker);
    bridge.initialize();
    const auto t0 = std::chrono::steady_clock::now();
    EXPECT_THROW(bridge.do_step(SimTime(0), Duration::from_millis(100)), StepTimeout);
    EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::milliseconds(500));
}

TEST(Bridge, FirstStepWithoutDataTimesOutThreaded) {
    auto broker = std::make_shared<InMemoryBroker>();
    auto cfg = config(Policy::V1Conservative, IngestMode::Threaded);
    cfg.timeout = Duration::from_millis(10);
    BridgeUnit bridge(cfg, broker);
    bridge.initialize();
    EXPECT_THROW(bridge.do_step(SimTime(0), Duration::from_millis(100)), StepTimeout);
}

TEST(Bridge, VirtualTimeoutAdvancesClockToDeadline) {
    auto broker = std::make_shared<InMemoryBroker>();
    VirtualClock clock;
    auto cfg = config(Policy::V2MoveToLatest);
    cfg.timeout = Duration::from_seconds(1);
    BridgeUnit bridge(cfg, broker, &clock);
    bridge.initialize();
    try {
        bridge.do_step(SimTime(0), Duration::from_millis(100));
        FAIL();
    } catch (const StepTimeout& e) {
        EXPECT_EQ(e.horizon(), SimTime(100 * ms));
        EXPECT_EQ(e.queue_len(), 0u);
    }
    EXPECT_EQ(clock.now(), Duration::from_seconds(1));
}

TEST(Bridge, GaplessV2RemovesInitialDelay) {
    for (auto mode : {IngestMode::Unthreaded, IngestMode::Threaded}) {
        auto broker = std::make_shared<InMemoryBroker>();
        VirtualClock clock;
        schedule_gapless(*broker, clock, 60, 100 * ms);
        BridgeUnit bridge(config(Policy::V2MoveToLatest, mode), broker, &clock);
        bridge.initialize();
        const auto reports = run_steps(bridge, clock, 50, 100 * ms, 100 * ms);
        for (std::size_t k = 1; k <= reports.size(); ++k) {
            EXPECT_EQ(reports[k - 1].out_seqno, k);
            EXPECT_FALSE(reports[k - 1].held);
            EXPECT_EQ(reports[k - 1].consumed, 1u);
        }
    }
}

TEST(Bridge, GaplessV1HoldsFirstRecord) {
    for (auto mode : {IngestMode::Unthreaded, IngestMode::Threaded}) {
        auto broker = std::make_shared<InMemoryBroker>();
        VirtualClock clock;
        schedule_gapless(*broker, clock, 60, 100 * ms);
        BridgeUnit bridge(config(Policy::V1Conservative, mode), broker, &clock);
        bridge.initialize();
        const auto reports = run_steps(bridge, clock, 20, 100 * ms, 100 * ms);
        for (std::size_t k = 1; k <= reports.size(); ++k) {
            EXPECT_EQ(reports[k - 1].out_seqno, 1u) << k;
            EXPECT_EQ(reports[k - 1].held, k > 1);
        }
        if (mode == IngestMode::Unthreaded) {
            // A holding conservative bridge leaves the data on the transport.
            EXPECT_EQ(reports.back().queue_len_exit, 0u);
        } else {
            EXPECT_EQ(reports.back().queue_len_exit, 19u);
        }
    }
}

TEST(Bridge, MatchesOracleOnGappedStream) {
    // Stamped 100 ms apart but published every 300 ms, with no delay: the bridge has to wait.
    auto broker = std::make_shared<InMemoryBroker>();
    VirtualClock clock;
    std::vector<oracle::Record> recs;
    for (int k = 1; k <= 60; ++k) {
        clock.schedule(Duration(k * 300 * ms),
                       [&, k] { broker->publish({"cobridge.data", encode_record(rec(k, k * 100 * ms))}); });
        recs.push_back({static_cast<std::uint64_t>(k), k * 100 * ms, k * 300 * ms});
    }
    auto cfg = config(Policy::V2MoveToLatest);
    cfg.maxage = Duration::from_millis(400);
    cfg.lookahead = 2;
    BridgeUnit bridge(cfg, broker, &clock);
    bridge.initialize();
    const auto expected = oracle::outputs(recs, {0, 100 * ms, 40, 0, 10'000 * ms}, {Policy::V2MoveToLatest, 400 * ms, 2});
    ASSERT_FALSE(expected.timeout_step);
    SimTime t(0);
    for (const auto& e : expected.steps) {
        const auto r = bridge.do_step(t, Duration(100 * ms));
        ASSERT_EQ(r.out_seqno, e.out_seqno) << e.step;
        ASSERT_EQ(r.held, e.held) << e.step;
        ASSERT_EQ(r.consumed, e.consumed) << e.step;
        ASSERT_LE(r.out_ts->nanos(), r.sim_time_end.nanos());
        t = t + Duration(100 * ms);
    }
}

TEST(Bridge, GetOutputCarriesRecordValues) {
    auto broker = std::make_shared<InMemoryBroker>();
    auto cfg = config(Policy::V2MoveToLatest);
    cfg.lookahead = 50;
    BridgeUnit bridge(cfg, broker);
    for (int k = 1; k <= 5; ++k) broker->publish({"cobridge.data", encode_record(rec(k, k * 100 * ms))});
    bridge.initialize();
    const auto r = bridge.do_step(SimTime(0), Duration(500 * ms));
    EXPECT_EQ(r.out_seqno, 5u);
    EXPECT_EQ(r.consumed, 5u);
    EXPECT_EQ(bridge.get_output("value"), Value(50.0));
    EXPECT_THROW(bridge.get_output("nope"), UsageError);
}

TEST(Bridge, IntegerDataCoercedToRealOutput) {
    auto broker = std::make_shared<InMemoryBroker>();
    BridgeUnit bridge(config(Policy::V2MoveToLatest), broker);
    broker->publish({"cobridge.data", encode_record({100 * ms, 1, {{"value", Value(std::int64_t{3})}}})});
    bridge.initialize();
    bridge.do_step(SimTime(0), Duration(100 * ms));
    EXPECT_EQ(bridge.get_output("value"), Value(3.0));
}

TEST(Bridge, LifecycleErrors) {
    auto broker = std::make_shared<InMemoryBroker>();
    auto cfg = config(Policy::V2MoveToLatest);
    cfg.variables.push_back({"stop", ValueKind::Boolean, Direction::Input});
    BridgeUnit bridge(cfg, broker);
    EXPECT_THROW(bridge.do_step(SimTime(0), Duration(ms)), UsageError);
    bridge.set_input("stop", Value(true));
    EXPECT_THROW(bridge.get_output("value"), NotYetStepped);
    EXPECT_THROW(bridge.get_output("stop"), NotYetStepped);
    EXPECT_THROW(bridge.set_input("stop", Value(1.0)), UsageError);
    EXPECT_THROW(bridge.set_input("value", Value(1.0)), UsageError);
    bridge.initialize();
    EXPECT_THROW(bridge.initialize(), UsageError);
    broker->publish({"cobridge.data", encode_record(rec(1, 100 * ms))});
    bridge.do_step(SimTime(0), Duration(100 * ms));
    EXPECT_THROW(bridge.do_step(SimTime(0), Duration(100 * ms)), UsageError);
    bridge.terminate();
    bridge.terminate();
    EXPECT_EQ(bridge.lifecycle(), Lifecycle::Terminated);
    EXPECT_THROW(bridge.do_step(SimTime(100 * ms), Duration(100 * ms)), UsageError);
}

TEST(Bridge, ConfigValidation) {
    auto broker = std::make_shared<InMemoryBroker>();
    auto cfg = config(Policy::V2MoveToLatest);
    cfg.lookahead = 0;
    EXPECT_THROW(BridgeUnit(cfg, broker), ValidationError);
    cfg = config(Policy::V2MoveToLatest);
    cfg.timeout = Duration(0);
    EXPECT_THROW(BridgeUnit(cfg, broker), ValidationError);
    cfg = config(Policy::V2MoveToLatest);
    cfg.variables.push_back({"value", ValueKind::Real, Direction::Input});
    EXPECT_THROW(BridgeUnit(cfg, broker), ValidationError);
}

TEST(Bridge, RecordMissingOutputIsDecodeError) {
    for (auto mode : {IngestMode::Unthreaded, IngestMode::Threaded}) {
        auto broker = std::make_shared<InMemoryBroker>();
        VirtualClock clock;
        BridgeUnit bridge(config(Policy::V2MoveToLatest, mode), broker, &clock);
        broker->publish({"cobridge.data", encode_record({100 * ms, 1, {{"other", Value(1.0)}}})});
        bridge.initialize();
        EXPECT_THROW(bridge.do_step(SimTime(0), Duration(100 * ms)), DecodeError);
    }
}

TEST(PublishOnChange, NoInputsPublishesNothing) {
    auto broker = std::make_shared<InMemoryBroker>();
    BridgeUnit bridge(config(Policy::V2MoveToLatest), broker);
    bridge.initialize();
    EXPECT_EQ(bridge.publish_changed_inputs(SimTime(0)), 0u);
}

TEST(PublishOnChange, OnlyChangedSubset) {
    auto broker = std::make_shared<InMemoryBroker>();
    auto out = broker->subscribe("cobridge.inputs");
    auto cfg = config(Policy::V2MoveToLatest);
    cfg.variables.push_back({"stop", ValueKind::Boolean, Direction::Input});
    cfg.variables.push_back({"speed", ValueKind::Real, Direction::Input});
    cfg.scenario_epoch = 1'000;
    BridgeUnit bridge(cfg, broker);
    for (int k = 1; k <= 3; ++k) broker->publish({"cobridge.data", encode_record(rec(k, 1'000 + k * 100 * ms))});
    bridge.initialize();

    bridge.set_input("stop", Value(false));
    EXPECT_EQ(bridge.do_step(SimTime(0), Duration(100 * ms)).published, 1u);
    bridge.set_input("stop", Value(false));
    EXPECT_EQ(bridge.do_step(SimTime(100 * ms), Duration(100 * ms)).published, 0u);
    bridge.set_input("stop", Value(true));
    EXPECT_EQ(bridge.do_step(SimTime(200 * ms), Duration(100 * ms)).published, 1u);
    EXPECT_EQ(bridge.get_output("stop"), Value(true));

    auto got = out->poll(10, Duration::zero());
    ASSERT_EQ(got.size(), 2u);
    const auto first = decode_record(got[0].payload);
    EXPECT_EQ(first.seqno, 1u);
    EXPECT_EQ(first.data_ts, 1'000);
    EXPECT_EQ(first.values.size(), 2u);
    const auto second = decode_record(got[1].payload);
    EXPECT_EQ(second.seqno, 2u);
    EXPECT_EQ(second.data_ts, 1'000 + 200 * ms);
    ASSERT_EQ(second.values.size(), 1u);
    EXPECT_EQ(second.values.at("stop"), Value(true));
}

TEST(Bridge, WallclockThreadedFollowsLiveStream) {
    auto broker = std::make_shared<InMemoryBroker>();
    auto cfg = config(Policy::V2MoveToLatest, IngestMode::Threaded);
    cfg.timeout = Duration::from_seconds(2);
    BridgeUnit bridge(cfg, broker);
    bridge.initialize();
    std::thread producer([&] {
        for (int k = 1; k <= 5; ++k) {
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            broker->publish({"cobridge.data", encode_record(rec(k, k * 10 * ms))});
        }
    });
    SimTime t(0);
    std::uint64_t last = 0;
    for (int k = 1; k <= 5; ++k) {
        const auto r = bridge.do_step(t, Duration(10 * ms));
        ASSERT_TRUE(r.out_seqno);
        EXPECT_GE(*r.out_seqno, last);
        last = *r.out_seqno;
        t = t + Duration(10 * ms);
    }
    producer.join();
    bridge.terminate();
}
