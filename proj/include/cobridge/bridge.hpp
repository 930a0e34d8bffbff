#pragma once

#include "cobridge/broker.hpp"
#include "cobridge/error.hpp"
#include "cobridge/incoming_queue.hpp"
#include "cobridge/ingest.hpp"
#include "cobridge/policy.hpp"
#include "cobridge/record.hpp"
#include "cobridge/time.hpp"
#include "cobridge/value.hpp"
#include "cobridge/virtual_clock.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace cobridge {

struct BridgeConfig {
    Duration maxage = Duration::from_millis(2000);
    std::size_t lookahead = 1;
    Duration timeout = Duration::from_seconds(10);
    Policy policy = Policy::V2MoveToLatest;
    IngestMode ingest_mode = IngestMode::Threaded;
    std::size_t queue_capacity = kDefaultQueueCapacity;
    std::string routing_key_in = "cobridge.data";
    std::string routing_key_out = "cobridge.inputs";
    std::vector<VariableDecl> variables;
    /// Data timestamp that maps to simulation time zero.
    EpochNanos scenario_epoch = 0;

    /// Throws ValidationError naming the offending key.
    void validate() const;
};

enum class Lifecycle { Configured, Initialized, Stepping, Terminated };

struct StepReport {
    std::uint64_t step_index = 0;
    SimTime sim_time_end;
    Duration wall_duration;
    std::uint64_t consumed = 0;
    std::uint64_t queue_len_exit = 0;
    std::optional<std::uint64_t> out_seqno;
    std::optional<SimTime> out_ts;
    bool held = false;
    std::uint64_t published = 0;
    std::uint64_t dropped_so_far = 0;

    bool operator==(const StepReport&) const = default;
};

/// get_output called before any step produced an output.
class NotYetStepped : public UsageError {
public:
    using UsageError::UsageError;
};

/// No usable data arrived within the configured timeout.
class StepTimeout : public Error {
public:
    StepTimeout(SimTime horizon, std::size_t queue_len, std::uint64_t dropped);

    SimTime horizon() const noexcept { return horizon_; }
    std::size_t queue_len() const noexcept { return queue_len_; }

private:
    SimTime horizon_;
    std::size_t queue_len_;
};

/// Unit that feeds a timestamped external stream into a fixed-step co-simulation and
/// publishes its inputs back out when they change.
///
/// Lifecycle: constructed (Configured, subscription open) -> initialize() -> do_step()...
/// -> terminate(). Confined to one thread; in Threaded mode a consumer thread fills the
/// incoming queue in the background.
///
/// When `clock` is given the unit runs on logical time: waiting for data advances the
/// clock instead of sleeping, and wall durations are logical.
class BridgeUnit {
public:
    BridgeUnit(BridgeConfig config, std::shared_ptr<Broker> broker, VirtualClock* clock = nullptr);
    ~BridgeUnit();

    BridgeUnit(const BridgeUnit&) = delete;
    BridgeUnit& operator=(const BridgeUnit&) = delete;

    void initialize();
    void set_input(const std::string& name, Value value);
    Value get_output(const std::string& name) const;
    StepReport do_step(SimTime t_cur, Duration step);
    /// Idempotent. Stops the consumer thread and releases the subscription.
    void terminate();

    /// Publishes the inputs that changed since the last publication (all of them the first
    /// time) as one record stamped epoch + `t_cur`. Returns the number of records published.
    std::uint64_t publish_changed_inputs(SimTime t_cur);

    Lifecycle lifecycle() const noexcept { return lifecycle_; }
    const BridgeConfig& config() const noexcept { return config_; }
    const IncomingQueue& incoming() const noexcept { return queue_; }
    /// The record currently presented as output, if any.
    const TimestampedRecord* current_record() const noexcept { return current_ ? &current_->record : nullptr; }

private:
    struct Current {
        TimestampedRecord record;
        SimTime time;
    };

    const VariableDecl& find_var(const std::string& name, Direction dir) const;
    TimestampedRecord decode(const Envelope& env) const;
    void ingest(SimTime horizon);
    bool hold_applies(SimTime horizon) const;
    Decision select(SimTime horizon);
    void await_data(SimTime horizon, Duration waited, Duration slice);
    void rethrow_consumer_error();
    Duration elapsed_since(std::int64_t start_ns) const;
    std::int64_t now_ns() const;

    BridgeConfig config_;
    std::shared_ptr<Broker> broker_;
    VirtualClock* clock_;
    IncomingQueue queue_;
    std::unique_ptr<Subscription> sub_;
    std::unique_ptr<ConsumerThread> consumer_;
    RecordDecoder decoder_;

    Lifecycle lifecycle_ = Lifecycle::Configured;
    std::optional<Current> current_;
    std::map<std::string, Value> inputs_;
    std::optional<std::map<std::string, Value>> last_published_;
    std::uint64_t publish_counter_ = 0;
    std::uint64_t step_index_ = 0;
    std::optional<SimTime> expected_t_;
};

}  // namespace cobridge
