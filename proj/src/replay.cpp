#include "cobridge/replay.hpp"

#include "cobridge/error.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace cobridge {

namespace {

std::vector<std::string> split_csv_line(std::string_view line, std::size_t row) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    if (quoted) throw ParseError("row " + std::to_string(row), "unterminated quote");
    cells.push_back(std::move(cell));
    for (auto& c : cells) {
        const auto b = c.find_first_not_of(" \t\r");
        const auto e = c.find_last_not_of(" \t\r");
        c = b == std::string::npos ? std::string() : c.substr(b, e - b + 1);
    }
    return cells;
}

bool parse_int(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

Value infer_cell(const std::string& cell, std::size_t row, const std::string& column) {
    if (cell.empty()) throw ParseError("row " + std::to_string(row), "empty cell in column '" + column + "'");
    if (std::int64_t i = 0; parse_int(cell, i)) return Value(i);
    if (cell == "true") return Value(true);
    if (cell == "false") return Value(false);
    double d = 0.0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), d);
    if (ec == std::errc() && p == cell.data() + cell.size()) {
        if (!std::isfinite(d)) throw ParseError("row " + std::to_string(row), "non-finite value in '" + column + "'");
        return Value(d);
    }
    return Value(cell);
}

}  // namespace

void ReplaySchedule::validate() const {
    if (wall_period.is_zero()) throw ValidationError("replay.wall_period", "must be positive");
    if (source == Source::Synthetic) {
        if (data_spacing.is_zero()) throw ValidationError("replay.data_spacing", "must be positive");
        if (count == 0) throw ValidationError("replay.count", "synthetic sources need a positive count");
        for (const auto& v : synthetic) {
            if (v.name.empty()) throw ValidationError("replay.variables", "variable without a name");
            if (v.kind != ValueKind::Real && v.kind != ValueKind::Integer) {
                throw ValidationError("replay.variables." + v.name, "synthetic variables must be real or integer");
            }
        }
    }
    if (source == Source::Csv && csv_path.empty()) throw ValidationError("replay.csv", "path must not be empty");
    if (gap && gap->every_n == 0) throw ValidationError("replay.gap.every_n", "must be positive");
}

std::vector<TimestampedRecord> parse_csv(std::string_view text) {
    std::vector<TimestampedRecord> out;
    std::vector<std::string> header;
    std::optional<bool> nanos_timestamps;
    std::size_t row = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto cells = split_csv_line(line, row);
        if (header.empty()) {
            if (cells.size() < 3 || cells[0] != "seqno" || cells[1] != "timestamp") {
                throw ParseError("row " + std::to_string(row), "header must be seqno,timestamp,<var>...");
            }
            header = std::move(cells);
            continue;
        }
        const std::string where = "row " + std::to_string(row);
        if (cells.size() != header.size()) {
            throw ParseError(where, "expected " + std::to_string(header.size()) + " cells, got " +
                                        std::to_string(cells.size()));
        }
        TimestampedRecord rec;
        std::int64_t seq = 0;
        if (!parse_int(cells[0], seq) || seq < 0) throw ParseError(where, "seqno is not a non-negative integer");
        rec.seqno = static_cast<std::uint64_t>(seq);

        std::int64_t ts = 0;
        const bool is_int = parse_int(cells[1], ts);
        if (!nanos_timestamps) nanos_timestamps = is_int;
        if (*nanos_timestamps) {
            if (!is_int) throw ParseError(where, "timestamp column holds integer nanoseconds, got '" + cells[1] + "'");
            rec.data_ts = ts;
        } else {
            try {
                rec.data_ts = parse_timestamp(cells[1]);
            } catch (const ParseError& e) {
                throw ParseError(where, std::string("timestamp: ") + e.what());
            }
        }
        for (std::size_t c = 2; c < cells.size(); ++c) rec.values.emplace(header[c], infer_cell(cells[c], row, header[c]));
        if (!out.empty() && rec.seqno <= out.back().seqno) throw ParseError(where, "seqno must increase");
        out.push_back(std::move(rec));
    }
    if (header.empty()) throw ParseError("row 1", "missing header");
    return out;
}

std::vector<TimestampedRecord> load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("replay.csv", "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str());
}

std::vector<TimestampedRecord> materialize(const ReplaySchedule& schedule, std::uint64_t seed) {
    schedule.validate();
    std::vector<TimestampedRecord> records;

    if (schedule.source == ReplaySchedule::Source::Synthetic) {
        std::vector<SyntheticVariable> vars = schedule.synthetic;
        if (vars.empty()) vars.push_back({"value", ValueKind::Real, 0.0, 1.0});
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
        std::uniform_int_distribution<std::int64_t> counter(0, 1000);

        records.reserve(schedule.count);
        for (std::size_t k = 1; k <= schedule.count; ++k) {
            TimestampedRecord rec;
            rec.seqno = k;
            rec.data_ts = schedule.epoch + schedule.data_spacing.nanos() * static_cast<std::int64_t>(k);
            for (const auto& v : vars) {
                const double x = v.start + v.slope * static_cast<double>(k);
                rec.values.emplace(v.name, v.kind == ValueKind::Integer ? Value(static_cast<std::int64_t>(std::llround(x)))
                                                                        : Value(x));
            }
            if (schedule.wide_rows) {
                for (int i = 0; i < 106; ++i) rec.values.emplace("q" + std::to_string(i), Value(angle(rng)));
                for (int i = 0; i < 10; ++i) rec.values.emplace("i" + std::to_string(i), Value(counter(rng)));
            }
            records.push_back(std::move(rec));
        }
    } else {
        records = schedule.source == ReplaySchedule::Source::Csv ? load_csv(schedule.csv_path) : schedule.inline_records;
        if (schedule.count > 0) {
            if (records.size() < schedule.count) {
                throw ValidationError("replay.count", "source has " + std::to_string(records.size()) +
                                                          " rows, fewer than count " + std::to_string(schedule.count));
            }
            records.resize(schedule.count);
        }
    }

    if (schedule.gap) {
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto gaps = static_cast<std::int64_t>(i / schedule.gap->every_n);
            records[i].data_ts += gaps * schedule.gap->extra.nanos();
        }
    }
    return records;
}

void schedule_replay(const std::vector<TimestampedRecord>& records, const ReplaySchedule& schedule,
                     const std::string& routing_key, Broker& broker, VirtualClock& clock) {
    for (std::size_t k = 1; k <= records.size(); ++k) {
        clock.schedule(publish_offset(schedule, k),
                       [&broker, routing_key, payload = encode_record(records[k - 1])] {
                           broker.publish(Envelope{routing_key, payload});
                       });
    }
}

Replayer::Replayer(std::vector<TimestampedRecord> records, ReplaySchedule schedule, std::string routing_key,
                   Broker& broker)
    : records_(std::move(records)), schedule_(std::move(schedule)), routing_key_(std::move(routing_key)), broker_(broker) {}

Replayer::~Replayer() {
    stop();
    if (thread_.joinable()) thread_.join();
}

void Replayer::start() {
    if (thread_.joinable()) throw UsageError("replayer already started");
    // Encode up front so publication instants are not skewed by serialization.
    std::vector<std::string> payloads;
    payloads.reserve(records_.size());
    for (const auto& r : records_) payloads.push_back(encode_record(r));

    thread_ = std::thread([this, payloads = std::move(payloads)] {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            for (std::size_t k = 1; k <= payloads.size() && !stop_.load(); ++k) {
                const auto due = t0 + publish_offset(schedule_, k).chrono();
                while (!stop_.load() && std::chrono::steady_clock::now() < due) {
                    std::this_thread::sleep_until(std::min(due, std::chrono::steady_clock::now() + std::chrono::milliseconds(50)));
                }
                if (stop_.load()) break;
                broker_.publish(Envelope{routing_key_, payloads[k - 1]});
                published_.fetch_add(1);
            }
        } catch (...) {
            error_ = std::current_exception();
        }
    });
}

std::size_t Replayer::wait() {
    if (thread_.joinable()) thread_.join();
    if (error_) std::rethrow_exception(error_);
    return published_.load();
}

void Replayer::stop() { stop_ = true; }

std::size_t replay(const ReplaySchedule& schedule, const std::string& routing_key, Broker& broker, std::uint64_t seed) {
    Replayer r(materialize(schedule, seed), schedule, routing_key, broker);
    r.start();
    return r.wait();
}

}  // namespace cobridge
