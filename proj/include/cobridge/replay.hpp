#pragma once

#include "cobridge/broker.hpp"
#include "cobridge/record.hpp"
#include "cobridge/time.hpp"
#include "cobridge/value.hpp"
#include "cobridge/virtual_clock.hpp"

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace cobridge {

/// Synthetic variable whose value for record k is `start + slope * k`.
struct SyntheticVariable {
    std::string name;
    ValueKind kind = ValueKind::Real;
    double start = 0.0;
    double slope = 1.0;
};

/// Widens data timestamps: every `every_n` records the following timestamps move `extra`
/// further out, while publication cadence stays constant.
struct GapSpec {
    std::size_t every_n = 1;
    Duration extra;
};

struct ReplaySchedule {
    enum class Source { Synthetic, Inline, Csv };

    Source source = Source::Synthetic;
    /// Synthetic: base timestamp; record k is stamped epoch + k * data_spacing.
    EpochNanos epoch = 0;
    std::vector<SyntheticVariable> synthetic;
    /// Synthetic: add 106 random reals `q0..q105` and 10 random integers `i0..i9`, 117 fields with `value`.
    bool wide_rows = false;
    std::vector<TimestampedRecord> inline_records;
    std::string csv_path;

    /// Spacing of publication instants; record k is published k * wall_period after start.
    Duration wall_period = Duration::from_millis(2);
    Duration data_spacing = Duration::from_millis(2);
    std::optional<GapSpec> gap;
    /// Records to publish; 0 means all rows of an inline or CSV source.
    std::size_t count = 0;

    /// Throws ValidationError naming the offending `replay.*` key.
    void validate() const;
};

/// Reads `seqno,timestamp,<var>...` rows. Timestamps may be ISO-8601 or integer
/// nanoseconds. Cell kinds are inferred: integer, real, `true`/`false`, otherwise text.
/// Throws ParseError whose field names the row, e.g. `row 7`.
std::vector<TimestampedRecord> load_csv(const std::string& path);
std::vector<TimestampedRecord> parse_csv(std::string_view text);

/// The records a schedule publishes, in publication order, with gap extras applied.
/// `seed` drives the wide-row generator.
std::vector<TimestampedRecord> materialize(const ReplaySchedule& schedule, std::uint64_t seed);

/// Publication offset of the k-th record (1-based) relative to replay start.
inline Duration publish_offset(const ReplaySchedule& schedule, std::size_t k) {
    return schedule.wall_period * static_cast<std::int64_t>(k);
}

/// Publishes `records` on the logical clock: record k at publish_offset(k).
void schedule_replay(const std::vector<TimestampedRecord>& records, const ReplaySchedule& schedule,
                     const std::string& routing_key, Broker& broker, VirtualClock& clock);

/// Publishes in real time from a background thread.
class Replayer {
public:
    Replayer(std::vector<TimestampedRecord> records, ReplaySchedule schedule, std::string routing_key,
             Broker& broker);
    ~Replayer();

    Replayer(const Replayer&) = delete;
    Replayer& operator=(const Replayer&) = delete;

    /// Starts publishing; record k goes out at start + publish_offset(k).
    void start();
    /// Blocks until every record is published or stop() was called. Rethrows a publish error.
    std::size_t wait();
    void stop();

    std::size_t published() const noexcept { return published_.load(); }

private:
    std::vector<TimestampedRecord> records_;
    ReplaySchedule schedule_;
    std::string routing_key_;
    Broker& broker_;
    std::thread thread_;
    std::atomic<bool> stop_{false};
    std::atomic<std::size_t> published_{0};
    std::exception_ptr error_;
};

/// Blocking wall-clock replay; returns the number of records published.
std::size_t replay(const ReplaySchedule& schedule, const std::string& routing_key, Broker& broker,
                   std::uint64_t seed = 0);

}  // namespace cobridge
