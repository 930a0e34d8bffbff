#include "cobridge/bridge.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>

namespace cobridge {

namespace {

// Upper bound on how long a virtual-mode step waits for the consumer thread to catch up.
constexpr auto kQuiesceLimit = Duration::from_seconds(30);

Value default_value(ValueKind kind) {
    switch (kind) {
        case ValueKind::Integer: return Value(std::int64_t{0});
        case ValueKind::Real: return Value(0.0);
        case ValueKind::Boolean: return Value(false);
        case ValueKind::Text: return Value(std::string());
    }
    return {};
}

void check_key(const std::string& key, const std::string& name) {
    try {
        validate_routing_key(name);
    } catch (const TransportError& e) {
        throw ValidationError(key, e.what());
    }
}

}  // namespace

void BridgeConfig::validate() const {
    if (lookahead < 1) throw ValidationError("bridge.lookahead", "must be at least 1");
    if (timeout.is_zero()) throw ValidationError("bridge.timeout", "must be positive");
    if (queue_capacity == 0) throw ValidationError("bridge.queue_capacity", "must be positive");
    check_key("bridge.routing_key_in", routing_key_in);
    try {
        check_unique_names(variables);
    } catch (const UsageError& e) {
        throw ValidationError("bridge.variables", e.what());
    }
    const bool has_inputs = std::any_of(variables.begin(), variables.end(),
                                        [](const VariableDecl& v) { return v.direction == Direction::Input; });
    if (has_inputs) check_key("bridge.routing_key_out", routing_key_out);
}

StepTimeout::StepTimeout(SimTime horizon, std::size_t queue_len, std::uint64_t dropped)
    : Error("step timeout: no data at or before t=" + format_duration(Duration(horizon.nanos())) +
            " within the configured timeout (queue length " + std::to_string(queue_len) + ", dropped " +
            std::to_string(dropped) + ")"),
      horizon_(horizon),
      queue_len_(queue_len) {}

BridgeUnit::BridgeUnit(BridgeConfig config, std::shared_ptr<Broker> broker, VirtualClock* clock)
    : config_(std::move(config)), broker_(std::move(broker)), clock_(clock), queue_(config_.queue_capacity) {
    config_.validate();
    if (!broker_) throw UsageError("bridge needs a broker");
    for (const auto& v : config_.variables) {
        if (v.direction == Direction::Input) inputs_.emplace(v.name, default_value(v.kind));
    }
    decoder_ = [this](const Envelope& env) { return decode(env); };
    sub_ = broker_->subscribe(config_.routing_key_in);
}

BridgeUnit::~BridgeUnit() { terminate(); }

void BridgeUnit::initialize() {
    if (lifecycle_ != Lifecycle::Configured) throw UsageError("initialize: bridge is not in Configured state");
    if (config_.ingest_mode == IngestMode::Threaded) {
        consumer_ = std::make_unique<ConsumerThread>(queue_, *sub_, decoder_);
        consumer_->start();
    }
    lifecycle_ = Lifecycle::Initialized;
}

const VariableDecl& BridgeUnit::find_var(const std::string& name, Direction dir) const {
    for (const auto& v : config_.variables) {
        if (v.name == name && v.direction == dir) return v;
    }
    throw UsageError("unknown " + std::string(dir == Direction::Input ? "input" : "output") + " '" + name + "'");
}

void BridgeUnit::set_input(const std::string& name, Value value) {
    if (lifecycle_ == Lifecycle::Terminated) throw UsageError("set_input after terminate");
    const auto& decl = find_var(name, Direction::Input);
    if (value.kind() != decl.kind) {
        throw UsageError("input '" + name + "' is " + std::string(to_string(decl.kind)) + ", got " +
                         std::string(to_string(value.kind())));
    }
    inputs_[name] = std::move(value);
}

Value BridgeUnit::get_output(const std::string& name) const {
    const bool is_input = inputs_.contains(name);
    if (!is_input) find_var(name, Direction::Output);
    if (!current_) throw NotYetStepped("get_output('" + name + "') before the first completed step");
    if (is_input) return inputs_.at(name);
    return current_->record.values.at(name);
}

TimestampedRecord BridgeUnit::decode(const Envelope& env) const {
    TimestampedRecord rec = decode_record(env.payload);
    if (rec.data_ts < config_.scenario_epoch) {
        throw DecodeError("record seqno " + std::to_string(rec.seqno) + " is timestamped before the scenario epoch", 0);
    }
    for (const auto& v : config_.variables) {
        if (v.direction != Direction::Output) continue;
        auto it = rec.values.find(v.name);
        if (it == rec.values.end()) {
            throw DecodeError("record seqno " + std::to_string(rec.seqno) + " lacks output '" + v.name + "'", 0);
        }
        if (it->second.kind() == v.kind) continue;
        if (v.kind == ValueKind::Real && it->second.is_integer()) {
            it->second = Value(static_cast<double>(it->second.as_integer()));
            continue;
        }
        throw DecodeError("output '" + v.name + "' is " + std::string(to_string(it->second.kind())) + ", declared " +
                              std::string(to_string(v.kind)),
                          0);
    }
    return rec;
}

std::uint64_t BridgeUnit::publish_changed_inputs(SimTime t_cur) {
    if (lifecycle_ != Lifecycle::Initialized && lifecycle_ != Lifecycle::Stepping) {
        throw UsageError("publish_changed_inputs: bridge is not initialized");
    }
    if (inputs_.empty()) return 0;

    TimestampedRecord rec;
    for (const auto& [name, value] : inputs_) {
        if (!last_published_ || !(last_published_->at(name) == value)) rec.values.emplace(name, value);
    }
    if (rec.values.empty()) return 0;

    rec.data_ts = config_.scenario_epoch + t_cur.nanos();
    rec.seqno = ++publish_counter_;
    broker_->publish(Envelope{config_.routing_key_out, encode_record(rec)});
    last_published_ = inputs_;
    return 1;
}

std::int64_t BridgeUnit::now_ns() const {
    if (clock_) return clock_->now().nanos();
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

Duration BridgeUnit::elapsed_since(std::int64_t start_ns) const { return Duration(std::max<std::int64_t>(0, now_ns() - start_ns)); }

void BridgeUnit::rethrow_consumer_error() {
    if (!consumer_) return;
    if (auto e = consumer_->take_error()) std::rethrow_exception(e);
}

bool BridgeUnit::hold_applies(SimTime horizon) const {
    return current_ && current_->time + config_.maxage >= horizon;
}

void BridgeUnit::ingest(SimTime horizon) {
    if (config_.ingest_mode == IngestMode::Threaded) {
        if (clock_ && !consumer_->wait_idle(kQuiesceLimit)) {
            rethrow_consumer_error();
            throw TransportError("consumer thread did not drain the subscription");
        }
        return;
    }
    // A conservative bridge that will hold does not touch the transport at all.
    if (config_.policy == Policy::V1Conservative && hold_applies(horizon)) return;

    const EpochNanos limit = config_.scenario_epoch + horizon.nanos();
    const std::size_t la = config_.lookahead;
    fill_unthreaded(
        queue_, *sub_,
        [limit, la](const IncomingQueue& q) {
            const auto back = q.back_timestamp();
            return (back && *back > limit) || q.count_at_or_before(limit, la) >= la;
        },
        Duration::zero(), decoder_);
}

Decision BridgeUnit::select(SimTime horizon) {
    auto view = queue_.lock();
    const std::size_t n = std::min(view.size(), config_.lookahead);
    std::vector<SimTime> times;
    times.reserve(n);
    for (std::size_t i = 0; i < n; ++i) times.push_back(SimTime(view[i].data_ts - config_.scenario_epoch));

    const std::optional<SimTime> current = current_ ? std::optional(current_->time) : std::nullopt;
    const Decision d = select_output(times, current, horizon, config_.policy, config_.maxage, config_.lookahead);
    if (d.kind == Decision::Kind::Advance) {
        const SimTime t = times[d.index];
        current_ = Current{view.consume(d.consumed), t};
    }
    return d;
}

void BridgeUnit::await_data(SimTime horizon, Duration waited, Duration slice) {
    if (clock_) return;
    const Duration left = config_.timeout.nanos() > waited.nanos() ? Duration(config_.timeout.nanos() - waited.nanos())
                                                                     : Duration::zero();
    const Duration wait = std::min(slice, left);
    if (config_.ingest_mode == IngestMode::Threaded) {
        queue_.wait_for_offer(queue_.offered_count(), wait);
        return;
    }
    const EpochNanos limit = config_.scenario_epoch + horizon.nanos();
    fill_unthreaded(
        queue_, *sub_,
        [limit](const IncomingQueue& q) { return q.count_at_or_before(limit, 1) >= 1; }, wait, decoder_);
}

StepReport BridgeUnit::do_step(SimTime t_cur, Duration step) {
    if (lifecycle_ != Lifecycle::Initialized && lifecycle_ != Lifecycle::Stepping) {
        throw UsageError("do_step: bridge is not initialized");
    }
    if (step.is_zero()) throw UsageError("do_step: step size must be positive");
    if (expected_t_ && t_cur != *expected_t_) {
        throw UsageError("do_step: t_cur " + std::to_string(t_cur.nanos()) + "ns does not continue from " +
                         std::to_string(expected_t_->nanos()) + "ns");
    }

    const std::int64_t start = now_ns();
    const SimTime horizon = t_cur + step;

    rethrow_consumer_error();
    StepReport report;
    report.step_index = step_index_ + 1;
    report.sim_time_end = horizon;
    report.published = publish_changed_inputs(t_cur);

    ingest(horizon);
    rethrow_consumer_error();
    Decision d = select(horizon);

    if (d.kind == Decision::Kind::NeedData) {
        const std::int64_t wait_start = now_ns();
        const Duration slice = std::min(config_.timeout / 10, Duration::from_millis(10));
        while (d.kind == Decision::Kind::NeedData) {
            if (clock_) {
                const Duration deadline(wait_start + config_.timeout.nanos());
                if (!clock_->advance_to_next(deadline)) {
                    clock_->advance_to(deadline);
                    throw StepTimeout(horizon, queue_.size(), queue_.dropped_count());
                }
                ingest(horizon);
            } else {
                const Duration waited = elapsed_since(wait_start);
                if (waited >= config_.timeout) throw StepTimeout(horizon, queue_.size(), queue_.dropped_count());
                await_data(horizon, waited, std::max(slice, Duration(1)));
                if (config_.ingest_mode == IngestMode::Unthreaded) ingest(horizon);
            }
            rethrow_consumer_error();
            d = select(horizon);
        }
    }

    report.held = d.kind == Decision::Kind::Hold;
    report.consumed = d.consumed;
    report.queue_len_exit = queue_.size();
    report.dropped_so_far = queue_.dropped_count();
    report.out_seqno = current_->record.seqno;
    report.out_ts = current_->time;
    report.wall_duration = elapsed_since(start);

    ++step_index_;
    expected_t_ = horizon;
    lifecycle_ = Lifecycle::Stepping;
    return report;
}

void BridgeUnit::terminate() {
    if (lifecycle_ == Lifecycle::Terminated) return;
    if (consumer_) consumer_->shutdown();
    consumer_.reset();
    sub_.reset();
    lifecycle_ = Lifecycle::Terminated;
    spdlog::debug("bridge on '{}' terminated after {} steps", config_.routing_key_in, step_index_);
}

}  // namespace cobridge
