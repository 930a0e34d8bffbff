#include "cobridge/orchestrator.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace cobridge {

namespace {

void busy_wait(Duration d) {
    if (d.is_zero()) return;
    const auto until = std::chrono::steady_clock::now() + d.chrono();
    while (std::chrono::steady_clock::now() < until) {
    }
}

const VariableDecl* find_decl(const BridgeConfig& cfg, const std::string& name, Direction dir) {
    for (const auto& v : cfg.variables) {
        if (v.name == name && v.direction == dir) return &v;
    }
    return nullptr;
}

void drain_outbound(Subscription* sub, std::uint64_t expected, std::uint64_t step, bool networked,
                    std::vector<OutboundRecord>& out) {
    if (!sub) return;
    std::uint64_t got = 0;
    for (;;) {
        const Duration wait = networked && got < expected ? Duration::from_seconds(2) : Duration::zero();
        auto batch = sub->poll(64, wait);
        if (batch.empty()) break;
        for (const auto& env : batch) {
            out.push_back({step, decode_record(env.payload)});
            ++got;
        }
    }
}

}  // namespace

std::string_view to_string(ClockMode m) noexcept { return m == ClockMode::Virtual ? "virtual" : "wallclock"; }
std::string_view to_string(IngestMode m) noexcept { return m == IngestMode::Threaded ? "threaded" : "unthreaded"; }
std::string_view to_string(TransportKind t) noexcept { return t == TransportKind::Tcp ? "tcp" : "memory"; }

void Scenario::validate() const {
    if (step_size.is_zero()) throw ValidationError("step_size", "must be positive");
    if (n_steps < 1) throw ValidationError("n_steps", "must be at least 1");
    bridge.validate();
    replay.validate();
    if (clock_mode == ClockMode::Virtual && transport == TransportKind::Tcp) {
        throw ValidationError("transport", "the virtual clock needs the in-memory transport");
    }
    if (monitor) {
        monitor->validate();
        for (const auto* name : {&monitor->robot_x, &monitor->robot_y, &monitor->obstacle_x, &monitor->obstacle_y}) {
            const auto* d = find_decl(bridge, *name, Direction::Output);
            if (!d || (d->kind != ValueKind::Real && d->kind != ValueKind::Integer)) {
                throw ValidationError("monitor", "bridge must declare numeric output '" + *name + "'");
            }
        }
        const auto* stop = find_decl(bridge, monitor->stop_out, Direction::Input);
        if (!stop || stop->kind != ValueKind::Boolean) {
            throw ValidationError("monitor", "bridge must declare boolean input '" + monitor->stop_out + "'");
        }
        if (const auto* dist = find_decl(bridge, monitor->distance_out, Direction::Input); dist && dist->kind != ValueKind::Real) {
            throw ValidationError("monitor", "bridge input '" + monitor->distance_out + "' must be real");
        }
    }
}

ScenarioPlan plan(const Scenario& scenario) {
    ScenarioPlan p;
    p.records = materialize(scenario.replay, scenario.seed);
    if (scenario.epoch) {
        p.epoch = *scenario.epoch;
    } else if (scenario.replay.source == ReplaySchedule::Source::Synthetic) {
        p.epoch = scenario.replay.epoch;
    } else {
        p.epoch = p.records.empty() ? 0 : p.records.front().data_ts;
    }
    if (scenario.start_time) {
        p.start = *scenario.start_time;
    } else if (!p.records.empty()) {
        const std::int64_t first = p.records.front().data_ts - p.epoch;
        p.start = SimTime(std::max<std::int64_t>(0, first - scenario.step_size.nanos()));
    }
    return p;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
    return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

TraceSummary RunTrace::summary() const {
    TraceSummary s;
    s.steps = steps.size();
    if (steps.empty()) return s;
    std::vector<double> us;
    us.reserve(steps.size());
    for (const auto& r : steps) {
        us.push_back(static_cast<double>(r.wall_duration.nanos()) / 1000.0);
        s.total_consumed += r.consumed;
        s.total_published += r.published;
    }
    s.mean_wall_us = std::accumulate(us.begin(), us.end(), 0.0) / static_cast<double>(us.size());
    s.max_wall_us = *std::max_element(us.begin(), us.end());
    s.p50_wall_us = percentile(us, 50.0);
    s.p99_wall_us = percentile(us, 99.0);
    s.dropped = steps.back().dropped_so_far;
    s.final_queue = steps.back().queue_len_exit;
    s.last_out_seqno = steps.back().out_seqno;
    return s;
}

RunTrace run(const Scenario& scenario) {
    scenario.validate();
    const ScenarioPlan p = plan(scenario);
    BridgeConfig cfg = scenario.bridge;
    cfg.scenario_epoch = p.epoch;

    // Broker first, then subscriptions, then the replayer, then initialization.
    std::unique_ptr<TcpBrokerServer> server;
    std::shared_ptr<Broker> broker;
    if (scenario.transport == TransportKind::Tcp) {
        Endpoint ep = scenario.broker;
        if (ep.port == 0) {
            server = std::make_unique<TcpBrokerServer>(ep);
            server->start();
            ep.port = server->port();
        }
        broker = std::make_shared<TcpBroker>(ep);
    } else {
        broker = std::make_shared<InMemoryBroker>();
    }

    std::optional<VirtualClock> vclock;
    if (scenario.clock_mode == ClockMode::Virtual) vclock.emplace();

    BridgeUnit bridge(cfg, broker, vclock ? &*vclock : nullptr);
    const bool has_inputs = std::any_of(cfg.variables.begin(), cfg.variables.end(),
                                        [](const VariableDecl& v) { return v.direction == Direction::Input; });
    std::unique_ptr<Subscription> outbound_sub;
    if (has_inputs) outbound_sub = broker->subscribe(cfg.routing_key_out);

    std::unique_ptr<Replayer> replayer;
    if (vclock) {
        schedule_replay(p.records, scenario.replay, cfg.routing_key_in, *broker, *vclock);
    } else {
        replayer = std::make_unique<Replayer>(p.records, scenario.replay, cfg.routing_key_in, *broker);
        replayer->start();
    }

    bridge.initialize();
    std::optional<MonitorUnit> monitor;
    if (scenario.monitor) monitor.emplace(*scenario.monitor);
    const bool wire_distance =
        monitor && find_decl(cfg, monitor->config().distance_out, Direction::Input) != nullptr;

    RunTrace trace;
    trace.steps.reserve(scenario.n_steps);
    const bool networked = scenario.transport == TransportKind::Tcp;
    SimTime t = p.start;

    auto shutdown = [&] {
        bridge.terminate();
        if (replayer) {
            replayer->stop();
            try {
                replayer->wait();
            } catch (const std::exception& e) {
                spdlog::warn("replayer: {}", e.what());
            }
        }
        outbound_sub.reset();
        broker->close();
        if (server) server->stop();
    };

    try {
        for (std::size_t k = 1; k <= scenario.n_steps; ++k) {
            // Jacobi exchange: every unit sees the others' outputs from the previous step.
            if (monitor) {
                const auto& mc = monitor->config();
                if (k > 1) {
                    for (const auto* name : {&mc.robot_x, &mc.robot_y, &mc.obstacle_x, &mc.obstacle_y}) {
                        monitor->set_input(*name, bridge.get_output(*name));
                    }
                }
                bridge.set_input(mc.stop_out, monitor->get_output(mc.stop_out));
                if (wire_distance) {
                    const double d = monitor->get_output(mc.distance_out).as_real();
                    // Keep the published value finite before the monitor has seen a position.
                    bridge.set_input(mc.distance_out, Value(std::isfinite(d) ? d : 0.0));
                }
            }

            if (vclock) {
                vclock->advance_to(vclock->now() + scenario.injected_delay);
            } else {
                busy_wait(scenario.injected_delay);
            }

            StepReport report;
            try {
                report = bridge.do_step(t, scenario.step_size);
            } catch (const StepTimeout& e) {
                trace.timeout_step = k;
                trace.timeout_message = e.what();
                break;
            }
            if (monitor) {
                monitor->do_step(t, scenario.step_size);
                trace.monitor.push_back({k, monitor->last().distance, monitor->last().stop});
            }
            drain_outbound(outbound_sub.get(), report.published, k, networked, trace.outbound);
            trace.steps.push_back(report);
            t = t + scenario.step_size;
        }
    } catch (const std::exception& e) {
        shutdown();
        throw RunAborted(e.what(), std::move(trace));
    }
    shutdown();
    return trace;
}

oracle::Outcome oracle_for(const Scenario& scenario) {
    scenario.validate();
    const ScenarioPlan p = plan(scenario);
    std::vector<oracle::Record> records;
    records.reserve(p.records.size());
    for (std::size_t k = 1; k <= p.records.size(); ++k) {
        const auto& r = p.records[k - 1];
        records.push_back({r.seqno, r.data_ts - p.epoch, publish_offset(scenario.replay, k).nanos()});
    }
    oracle::Schedule sched{p.start.nanos(), scenario.step_size.nanos(), scenario.n_steps,
                           scenario.injected_delay.nanos(), scenario.bridge.timeout.nanos()};
    oracle::Params params{scenario.bridge.policy, scenario.bridge.maxage.nanos(), scenario.bridge.lookahead};
    return oracle::outputs(records, sched, params);
}

}  // namespace cobridge
