#include "cobridge/config.hpp"
#include "cobridge/orchestrator.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace cobridge;

namespace {

constexpr std::int64_t ms = 1'000'000;

Scenario gapless(Policy p, IngestMode mode, std::size_t n_steps = 10) {
    Scenario sc;
    sc.step_size = Duration::from_millis(100);
    sc.n_steps = n_steps;
    sc.injected_delay = Duration::from_millis(100);
    sc.bridge.policy = p;
    sc.bridge.ingest_mode = mode;
    sc.bridge.variables = {{"value", ValueKind::Real, Direction::Output}};
    sc.replay.count = n_steps + 20;
    sc.replay.wall_period = Duration::from_millis(100);
    sc.replay.data_spacing = Duration::from_millis(100);
    return sc;
}

std::string trace_csv(const RunTrace& t) {
    std::ostringstream os;
    write_trace_csv(os, t);
    return os.str();
}

void expect_matches_oracle(const Scenario& sc) {
    const RunTrace trace = run(sc);
    const oracle::Outcome expected = oracle_for(sc);
    ASSERT_EQ(trace.timeout_step, expected.timeout_step) << sc.name;
    ASSERT_EQ(trace.steps.size(), expected.steps.size()) << sc.name;
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const auto& r = trace.steps[i];
        const auto& e = expected.steps[i];
        ASSERT_EQ(r.sim_time_end.nanos(), e.sim_time_end_ns) << sc.name << " step " << i + 1;
        ASSERT_EQ(r.out_seqno, e.out_seqno) << sc.name << " step " << i + 1;
        ASSERT_EQ(r.out_ts->nanos(), e.out_ts_ns) << sc.name << " step " << i + 1;
        ASSERT_EQ(r.held, e.held) << sc.name << " step " << i + 1;
        ASSERT_EQ(r.consumed, e.consumed) << sc.name << " step " << i + 1;
    }
}

}  // namespace

TEST(Run, GaplessTenStepsMatchesOracle) {
    const auto sc = gapless(Policy::V2MoveToLatest, IngestMode::Threaded);
    const auto trace = run(sc);
    ASSERT_EQ(trace.steps.size(), 10u);
    for (std::size_t k = 1; k <= 10; ++k) EXPECT_EQ(trace.steps[k - 1].out_seqno, k);
    expect_matches_oracle(sc);
}

TEST(Run, StartTimeAndEpochDefaults) {
    auto sc = gapless(Policy::V2MoveToLatest, IngestMode::Unthreaded);
    sc.replay.data_spacing = Duration::from_millis(500);
    sc.replay.epoch = 1'000;
    auto p = plan(sc);
    EXPECT_EQ(p.epoch, 1'000);
    EXPECT_EQ(p.start, SimTime(400 * ms));

    sc.replay.source = ReplaySchedule::Source::Inline;
    sc.replay.count = 0;
    sc.replay.inline_records = {{7'000 * ms, 1, {{"value", Value(1.0)}}}, {7'100 * ms, 2, {{"value", Value(2.0)}}}};
    p = plan(sc);
    EXPECT_EQ(p.epoch, 7'000 * ms);
    EXPECT_EQ(p.start, SimTime(0));
}

TEST(Run, DeterministicAcrossRepeats) {
    auto sc = gapless(Policy::V2MoveToLatest, IngestMode::Threaded, 50);
    sc.replay.wall_period = Duration::from_millis(7);
    sc.replay.data_spacing = Duration::from_millis(13);
    sc.replay.count = 2000;
    sc.replay.wide_rows = true;
    sc.bridge.lookahead = 5;
    sc.seed = 99;
    const std::string first = trace_csv(run(sc));
    for (int i = 0; i < 4; ++i) EXPECT_EQ(trace_csv(run(sc)), first);
}

TEST(Run, QueueGrowsByArrivalsMinusConsumption) {
    auto sc = gapless(Policy::V2MoveToLatest, IngestMode::Threaded, 20);
    sc.replay.wall_period = Duration::from_millis(2);
    sc.replay.data_spacing = Duration::from_millis(2);
    sc.replay.count = 1100;
    const auto trace = run(sc);
    for (std::size_t k = 1; k <= 20; ++k) {
        EXPECT_EQ(trace.steps[k - 1].queue_len_exit, 49 * k) << k;
        EXPECT_EQ(trace.steps[k - 1].consumed, 1u);
    }
}

TEST(Run, UnthreadedQueueEmptyAtExit) {
    auto sc = gapless(Policy::V2MoveToLatest, IngestMode::Unthreaded, 20);
    sc.replay.wall_period = Duration::from_millis(2);
    sc.replay.data_spacing = Duration::from_millis(2);
    sc.replay.count = 1100;
    const auto trace = run(sc);
    for (const auto& r : trace.steps) EXPECT_EQ(r.queue_len_exit, 0u);
}

TEST(Run, FiftyMessagesPerStep) {
    auto sc = gapless(Policy::V2MoveToLatest, IngestMode::Threaded, 20);
    sc.replay.wall_period = Duration::from_millis(2);
    sc.replay.data_spacing = Duration::from_millis(2);
    sc.replay.count = 1100;
    sc.bridge.lookahead = 100;
    const auto trace = run(sc);
    for (std::size_t k = 1; k <= 20; ++k) {
        EXPECT_EQ(trace.steps[k - 1].consumed, 50u);
        EXPECT_EQ(trace.steps[k - 1].out_seqno, 50 * k);
    }
}

TEST(Run, ModesAgreeAndMatchOracleOnRandomScenarios) {
    std::mt19937_64 rng(17);
    const std::size_t lookaheads[] = {1, 2, 5, 50, 100};
    const std::int64_t maxages[] = {200, 400, 2000};
    for (int i = 0; i < 40; ++i) {
        Scenario sc;
        sc.name = "random-" + std::to_string(i);
        sc.step_size = Duration::from_millis(10 + rng() % 200);
        sc.n_steps = 1 + rng() % 60;
        sc.injected_delay = Duration::from_millis(rng() % 3 == 0 ? 0 : rng() % 300);
        sc.bridge.policy = rng() % 2 ? Policy::V1Conservative : Policy::V2MoveToLatest;
        sc.bridge.lookahead = lookaheads[rng() % 5];
        sc.bridge.maxage = Duration::from_millis(maxages[rng() % 3]);
        sc.bridge.timeout = Duration::from_seconds(5);
        sc.bridge.variables = {{"value", ValueKind::Real, Direction::Output}};
        sc.replay.count = 1 + rng() % 400;
        sc.replay.wall_period = Duration::from_millis(1 + rng() % 100);
        sc.replay.data_spacing = Duration::from_millis(1 + rng() % 300);
        if (rng() % 3 == 0) sc.replay.gap = GapSpec{1 + rng() % 20, Duration::from_millis(rng() % 1500)};

        sc.bridge.ingest_mode = IngestMode::Threaded;
        const auto threaded = run(sc);
        expect_matches_oracle(sc);
        sc.bridge.ingest_mode = IngestMode::Unthreaded;
        const auto unthreaded = run(sc);
        expect_matches_oracle(sc);
        ASSERT_EQ(threaded.steps.size(), unthreaded.steps.size());
        for (std::size_t k = 0; k < threaded.steps.size(); ++k) {
            ASSERT_EQ(threaded.steps[k].out_seqno, unthreaded.steps[k].out_seqno);
            ASSERT_EQ(threaded.steps[k].out_ts, unthreaded.steps[k].out_ts);
            ASSERT_EQ(threaded.steps[k].held, unthreaded.steps[k].held);
        }
    }
}

TEST(Run, V2NeverLagsV1) {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 20; ++i) {
        auto sc = gapless(Policy::V1Conservative, IngestMode::Unthreaded, 40);
        sc.bridge.lookahead = 1 + rng() % 10;
        sc.bridge.maxage = Duration::from_millis(100 + rng() % 2000);
        sc.replay.count = 200;
        sc.replay.wall_period = Duration::from_millis(1 + rng() % 100);
        sc.replay.data_spacing = Duration::from_millis(1 + rng() % 200);
        const auto v1 = run(sc);
        sc.bridge.policy = Policy::V2MoveToLatest;
        const auto v2 = run(sc);
        ASSERT_EQ(v1.steps.size(), v2.steps.size());
        for (std::size_t k = 0; k < v1.steps.size(); ++k) ASSERT_GE(*v2.steps[k].out_seqno, *v1.steps[k].out_seqno);
    }
}

TEST(Run, TimeoutTruncatesTrace) {
    auto sc = gapless(Policy::V2MoveToLatest, IngestMode::Threaded, 10);
    sc.replay.count = 3;
    sc.bridge.maxage = Duration::from_millis(100);
    sc.bridge.timeout = Duration::from_millis(500);
    const auto trace = run(sc);
    EXPECT_EQ(trace.steps.size(), 4u);
    EXPECT_EQ(trace.timeout_step, 5u);
    EXPECT_FALSE(trace.timeout_message.empty());
    EXPECT_EQ(oracle_for(sc).timeout_step, 5u);
}

TEST(Run, MonitorStopPublishedOnce) {
    Scenario sc = gapless(Policy::V2MoveToLatest, IngestMode::Threaded, 30);
    sc.bridge.variables = {{"x_r", ValueKind::Real, Direction::Output},
                           {"y_r", ValueKind::Real, Direction::Output},
                           {"x_o", ValueKind::Real, Direction::Output},
                           {"y_o", ValueKind::Real, Direction::Output},
                           {"stop", ValueKind::Boolean, Direction::Input}};
    sc.replay.synthetic = {{"x_r", ValueKind::Real, 0.0, 0.25},
                           {"y_r", ValueKind::Real, 0.0, 0.0},
                           {"x_o", ValueKind::Real, 5.0, 0.0},
                           {"y_o", ValueKind::Real, 0.0, 0.0}};
    sc.monitor = MonitorConfig{};
    const auto trace = run(sc);
    ASSERT_EQ(trace.monitor.size(), 30u);

    // Monitor at step k sees the bridge output of step k-1, x_r = 0.25(k-1): below 1 m from step 18.
    std::optional<std::uint64_t> first_stop;
    for (const auto& m : trace.monitor) {
        if (m.stop && !first_stop) first_stop = m.step;
    }
    ASSERT_EQ(first_stop, 18u);

    std::vector<OutboundRecord> stops;
    for (const auto& o : trace.outbound) {
        auto it = o.record.values.find("stop");
        if (it != o.record.values.end() && it->second == Value(true)) stops.push_back(o);
    }
    ASSERT_EQ(stops.size(), 1u);
    const auto& crossing = trace.steps[*first_stop - 1];
    EXPECT_EQ(stops[0].record.data_ts, plan(sc).epoch + crossing.sim_time_end.nanos());
    EXPECT_EQ(stops[0].step, *first_stop + 1);
    // Initial state, the stop, and the release once the robot has passed the obstacle
    // (monitor step 25 sees x_r = 6.0).
    ASSERT_EQ(trace.outbound.size(), 3u);
    EXPECT_EQ(trace.outbound[2].record.values.at("stop"), Value(false));
    EXPECT_EQ(trace.outbound[2].step, 26u);
}

TEST(Run, ScenarioValidation) {
    auto sc = gapless(Policy::V2MoveToLatest, IngestMode::Threaded);
    sc.transport = TransportKind::Tcp;
    EXPECT_THROW(sc.validate(), ValidationError);
    sc = gapless(Policy::V2MoveToLatest, IngestMode::Threaded);
    sc.monitor = MonitorConfig{};
    EXPECT_THROW(sc.validate(), ValidationError);
    sc = gapless(Policy::V2MoveToLatest, IngestMode::Threaded);
    sc.n_steps = 0;
    EXPECT_THROW(sc.validate(), ValidationError);
}

TEST(Run, BadRecordAbortsWithPartialTrace) {
    auto sc = gapless(Policy::V2MoveToLatest, IngestMode::Unthreaded, 5);
    sc.replay.source = ReplaySchedule::Source::Inline;
    sc.replay.count = 0;
    sc.replay.inline_records = {{100 * ms, 1, {{"value", Value(1.0)}}}, {200 * ms, 2, {{"other", Value(2.0)}}}};
    sc.epoch = 0;
    try {
        run(sc);
        FAIL();
    } catch (const RunAborted& e) {
        EXPECT_EQ(e.partial().steps.size(), 1u);
    }
}

TEST(Run, WallclockOverTcp) {
    auto sc = gapless(Policy::V2MoveToLatest, IngestMode::Threaded, 10);
    sc.clock_mode = ClockMode::Wallclock;
    sc.transport = TransportKind::Tcp;
    sc.step_size = Duration::from_millis(10);
    sc.injected_delay = Duration::from_millis(10);
    sc.replay.wall_period = Duration::from_millis(10);
    sc.replay.data_spacing = Duration::from_millis(10);
    sc.bridge.variables.push_back({"ack", ValueKind::Boolean, Direction::Input});
    const auto trace = run(sc);
    ASSERT_EQ(trace.steps.size(), 10u);
    std::uint64_t prev = 0;
    for (const auto& r : trace.steps) {
        ASSERT_TRUE(r.out_seqno);
        EXPECT_GE(*r.out_seqno, prev);
        EXPECT_LE(r.out_ts->nanos(), r.sim_time_end.nanos());
        prev = *r.out_seqno;
    }
    EXPECT_EQ(trace.outbound.size(), 1u);
}

TEST(Run, WallclockUnthreadedQueueEmpty) {
    auto sc = gapless(Policy::V2MoveToLatest, IngestMode::Unthreaded, 20);
    sc.clock_mode = ClockMode::Wallclock;
    sc.step_size = Duration::from_millis(20);
    sc.injected_delay = Duration::from_millis(20);
    sc.replay.wall_period = Duration::from_millis(2);
    sc.replay.data_spacing = Duration::from_millis(2);
    sc.replay.count = 400;
    const auto trace = run(sc);
    for (const auto& r : trace.steps) EXPECT_EQ(r.queue_len_exit, 0u);
}

TEST(Summary, Percentiles) {
    EXPECT_EQ(percentile({}, 50), 0.0);
    EXPECT_EQ(percentile({5, 1, 3, 2, 4}, 50), 3.0);
    EXPECT_EQ(percentile({5, 1, 3, 2, 4}, 99), 5.0);
    EXPECT_EQ(percentile({5, 1, 3, 2, 4}, 0), 1.0);
}
