#include "cobridge/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace cobridge {

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

void check_keys(const YAML::Node& node, const std::string& prefix, std::initializer_list<std::string_view> allowed) {
    if (!node.IsMap()) throw ValidationError(prefix.empty() ? "<root>" : prefix, "expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ValidationError(join(prefix, key), "unknown key");
        }
    }
}

std::string scalar(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) throw ValidationError(key, "expected a scalar");
    return n.Scalar();
}

Duration duration_of(const YAML::Node& n, const std::string& key) {
    try {
        return parse_duration(scalar(n, key));
    } catch (const ParseError& e) {
        throw ValidationError(key, e.what());
    }
}

std::int64_t int_of(const YAML::Node& n, const std::string& key) {
    const std::string s = scalar(n, key);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ValidationError(key, "expected an integer, got '" + s + "'");
    return v;
}

std::size_t count_of(const YAML::Node& n, const std::string& key) {
    const std::int64_t v = int_of(n, key);
    if (v < 0) throw ValidationError(key, "must not be negative");
    return static_cast<std::size_t>(v);
}

double real_of(const YAML::Node& n, const std::string& key) {
    const std::string s = scalar(n, key);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
        throw ValidationError(key, "expected a finite number, got '" + s + "'");
    }
    return v;
}

bool bool_of(const YAML::Node& n, const std::string& key) {
    const std::string s = scalar(n, key);
    if (s == "true") return true;
    if (s == "false") return false;
    throw ValidationError(key, "expected true or false");
}

EpochNanos timestamp_of(const YAML::Node& n, const std::string& key) {
    const std::string s = scalar(n, key);
    std::int64_t v = 0;
    if (auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v); ec == std::errc() && p == s.data() + s.size()) {
        return v;
    }
    try {
        return parse_timestamp(s);
    } catch (const ParseError& e) {
        throw ValidationError(key, e.what());
    }
}

template <class F>
auto wrap(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ParseError& e) {
        throw ValidationError(key, e.what());
    }
}

Value value_of(const YAML::Node& n, const std::string& key) {
    const std::string s = scalar(n, key);
    if (n.Tag() == "!") return Value(s);  // quoted scalar
    if (s == "true") return Value(true);
    if (s == "false") return Value(false);
    std::int64_t i = 0;
    if (auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), i); ec == std::errc() && p == s.data() + s.size()) {
        return Value(i);
    }
    double d = 0.0;
    if (auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d); ec == std::errc() && p == s.data() + s.size()) {
        return Value(d);
    }
    return Value(s);
}

void read_decls(const YAML::Node& n, const std::string& key, Direction dir, std::vector<VariableDecl>& out) {
    if (!n.IsMap()) throw ValidationError(key, "expected a mapping of name: kind");
    for (const auto& kv : n) {
        const auto name = kv.first.as<std::string>();
        const auto kind = wrap(join(key, name), [&] { return value_kind_from_string(scalar(kv.second, join(key, name))); });
        out.push_back({name, kind, dir});
    }
}

void read_bridge(const YAML::Node& n, BridgeConfig& b) {
    check_keys(n, "bridge",
               {"policy", "maxage", "lookahead", "timeout", "ingest", "queue_capacity", "routing_key_in", "routing_key_out",
                "outputs", "inputs"});
    if (n["policy"]) b.policy = wrap("bridge.policy", [&] { return policy_from_string(scalar(n["policy"], "bridge.policy")); });
    if (n["maxage"]) b.maxage = duration_of(n["maxage"], "bridge.maxage");
    if (n["lookahead"]) {
        const auto la = int_of(n["lookahead"], "bridge.lookahead");
        if (la < 1) throw ValidationError("bridge.lookahead", "must be at least 1");
        b.lookahead = static_cast<std::size_t>(la);
    }
    if (n["timeout"]) b.timeout = duration_of(n["timeout"], "bridge.timeout");
    if (n["ingest"]) {
        const auto m = scalar(n["ingest"], "bridge.ingest");
        if (m == "threaded") {
            b.ingest_mode = IngestMode::Threaded;
        } else if (m == "unthreaded") {
            b.ingest_mode = IngestMode::Unthreaded;
        } else {
            throw ValidationError("bridge.ingest", "expected threaded or unthreaded");
        }
    }
    if (n["queue_capacity"]) b.queue_capacity = count_of(n["queue_capacity"], "bridge.queue_capacity");
    if (n["routing_key_in"]) b.routing_key_in = scalar(n["routing_key_in"], "bridge.routing_key_in");
    if (n["routing_key_out"]) b.routing_key_out = scalar(n["routing_key_out"], "bridge.routing_key_out");
    b.variables.clear();
    if (n["outputs"]) read_decls(n["outputs"], "bridge.outputs", Direction::Output, b.variables);
    if (n["inputs"]) read_decls(n["inputs"], "bridge.inputs", Direction::Input, b.variables);
}

void read_replay(const YAML::Node& n, ReplaySchedule& r, const std::string& base_dir) {
    check_keys(n, "replay",
               {"source", "csv", "records", "variables", "wide_rows", "wall_period", "data_spacing", "count", "epoch", "gap"});
    if (n["source"]) {
        const auto s = scalar(n["source"], "replay.source");
        if (s == "synthetic") {
            r.source = ReplaySchedule::Source::Synthetic;
        } else if (s == "inline") {
            r.source = ReplaySchedule::Source::Inline;
        } else if (s == "csv") {
            r.source = ReplaySchedule::Source::Csv;
        } else {
            throw ValidationError("replay.source", "expected synthetic, inline or csv");
        }
    } else if (n["csv"]) {
        r.source = ReplaySchedule::Source::Csv;
    } else if (n["records"]) {
        r.source = ReplaySchedule::Source::Inline;
    }
    if (n["csv"]) {
        fs::path p = scalar(n["csv"], "replay.csv");
        if (p.is_relative()) p = fs::path(base_dir) / p;
        r.csv_path = p.lexically_normal().string();
    }
    if (n["records"]) {
        const auto& list = n["records"];
        if (!list.IsSequence()) throw ValidationError("replay.records", "expected a list");
        std::size_t i = 0;
        for (const auto& item : list) {
            const std::string key = "replay.records[" + std::to_string(i++) + "]";
            check_keys(item, key, {"seqno", "timestamp", "values"});
            if (!item["seqno"] || !item["timestamp"] || !item["values"]) {
                throw ValidationError(key, "needs seqno, timestamp and values");
            }
            TimestampedRecord rec;
            const auto seq = int_of(item["seqno"], key + ".seqno");
            if (seq < 0) throw ValidationError(key + ".seqno", "must not be negative");
            rec.seqno = static_cast<std::uint64_t>(seq);
            rec.data_ts = timestamp_of(item["timestamp"], key + ".timestamp");
            if (!item["values"].IsMap() || item["values"].size() == 0) {
                throw ValidationError(key + ".values", "expected a non-empty mapping");
            }
            for (const auto& kv : item["values"]) {
                const auto name = kv.first.as<std::string>();
                rec.values.emplace(name, value_of(kv.second, key + ".values." + name));
            }
            r.inline_records.push_back(std::move(rec));
        }
    }
    if (n["variables"]) {
        const auto& vars = n["variables"];
        if (!vars.IsMap()) throw ValidationError("replay.variables", "expected a mapping");
        for (const auto& kv : vars) {
            const auto name = kv.first.as<std::string>();
            const std::string key = "replay.variables." + name;
            check_keys(kv.second, key, {"kind", "start", "slope"});
            SyntheticVariable v{name, ValueKind::Real, 0.0, 1.0};
            if (kv.second["kind"]) v.kind = wrap(key + ".kind", [&] { return value_kind_from_string(scalar(kv.second["kind"], key)); });
            if (kv.second["start"]) v.start = real_of(kv.second["start"], key + ".start");
            if (kv.second["slope"]) v.slope = real_of(kv.second["slope"], key + ".slope");
            r.synthetic.push_back(std::move(v));
        }
    }
    if (n["wide_rows"]) r.wide_rows = bool_of(n["wide_rows"], "replay.wide_rows");
    if (n["wall_period"]) r.wall_period = duration_of(n["wall_period"], "replay.wall_period");
    if (n["data_spacing"]) r.data_spacing = duration_of(n["data_spacing"], "replay.data_spacing");
    if (n["count"]) r.count = count_of(n["count"], "replay.count");
    if (n["epoch"]) r.epoch = timestamp_of(n["epoch"], "replay.epoch");
    if (n["gap"]) {
        check_keys(n["gap"], "replay.gap", {"every_n", "extra"});
        GapSpec g;
        if (n["gap"]["every_n"]) g.every_n = count_of(n["gap"]["every_n"], "replay.gap.every_n");
        if (!n["gap"]["extra"]) throw ValidationError("replay.gap.extra", "required");
        g.extra = duration_of(n["gap"]["extra"], "replay.gap.extra");
        r.gap = g;
    }
}

void read_monitor(const YAML::Node& n, MonitorConfig& m) {
    check_keys(n, "monitor", {"threshold", "robot", "obstacle", "distance", "stop"});
    if (n["threshold"]) m.threshold = real_of(n["threshold"], "monitor.threshold");
    auto pair_of = [&](const char* key, std::string& x, std::string& y) {
        const auto& p = n[key];
        if (!p) return;
        if (!p.IsSequence() || p.size() != 2) throw ValidationError(std::string("monitor.") + key, "expected [x, y]");
        x = scalar(p[0], std::string("monitor.") + key);
        y = scalar(p[1], std::string("monitor.") + key);
    };
    pair_of("robot", m.robot_x, m.robot_y);
    pair_of("obstacle", m.obstacle_x, m.obstacle_y);
    if (n["distance"]) m.distance_out = scalar(n["distance"], "monitor.distance");
    if (n["stop"]) m.stop_out = scalar(n["stop"], "monitor.stop");
}

void read_scenario(const YAML::Node& root, Scenario& sc, const std::string& base_dir) {
    check_keys(root, "",
               {"name", "step_size", "n_steps", "injected_delay", "clock", "start_time", "epoch", "transport", "broker",
                "seed", "bridge", "replay", "monitor"});
    if (root["name"]) sc.name = scalar(root["name"], "name");
    if (root["step_size"]) sc.step_size = duration_of(root["step_size"], "step_size");
    if (root["n_steps"]) sc.n_steps = count_of(root["n_steps"], "n_steps");
    if (root["injected_delay"]) sc.injected_delay = duration_of(root["injected_delay"], "injected_delay");
    if (root["clock"]) {
        const auto c = scalar(root["clock"], "clock");
        if (c == "virtual") {
            sc.clock_mode = ClockMode::Virtual;
        } else if (c == "wallclock") {
            sc.clock_mode = ClockMode::Wallclock;
        } else {
            throw ValidationError("clock", "expected virtual or wallclock");
        }
    }
    if (root["start_time"]) sc.start_time = SimTime(duration_of(root["start_time"], "start_time").nanos());
    if (root["epoch"]) sc.epoch = timestamp_of(root["epoch"], "epoch");
    if (root["transport"]) {
        const auto t = scalar(root["transport"], "transport");
        if (t == "memory") {
            sc.transport = TransportKind::Memory;
        } else if (t == "tcp") {
            sc.transport = TransportKind::Tcp;
        } else {
            throw ValidationError("transport", "expected memory or tcp");
        }
    }
    if (root["broker"]) sc.broker = wrap("broker", [&] { return parse_endpoint(scalar(root["broker"], "broker")); });
    if (root["seed"]) sc.seed = static_cast<std::uint64_t>(count_of(root["seed"], "seed"));
    if (root["bridge"]) read_bridge(root["bridge"], sc.bridge);
    if (root["replay"]) read_replay(root["replay"], sc.replay, base_dir);
    if (root["monitor"]) {
        MonitorConfig m;
        read_monitor(root["monitor"], m);
        sc.monitor = m;
    }
}

YAML::Node load_yaml(std::string_view text) {
    try {
        return YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        throw ParseError("yaml", e.what());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("file", "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string parent_dir(const std::string& path) {
    const auto p = fs::path(path).parent_path();
    return p.empty() ? "." : p.string();
}

std::string fmt_us(Duration d) {
    std::ostringstream os;
    os << d.nanos() / 1000 << '.' << std::setw(3) << std::setfill('0') << d.nanos() % 1000;
    return os.str();
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << v;
    return os.str();
}

}  // namespace

Scenario parse_scenario(std::string_view yaml_text, const std::string& base_dir) {
    Scenario sc;
    read_scenario(load_yaml(yaml_text), sc, base_dir);
    sc.validate();
    return sc;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path), parent_dir(path)); }

std::vector<std::string> validate_config(const Scenario& sc) {
    std::vector<std::string> warnings;
    const auto step = sc.step_size.nanos();
    const auto period = sc.replay.wall_period.nanos();
    if (step != period) {
        warnings.push_back("step_size " + format_duration(sc.step_size) + " does not match the data period " +
                           format_duration(sc.replay.wall_period) +
                           "; outputs will repeat or skip records unless the two are aligned");
    }
    if (period > 0) {
        const double expected = static_cast<double>(step) / static_cast<double>(period);
        if (static_cast<double>(sc.bridge.lookahead) < expected / 4.0) {
            std::ostringstream os;
            os << "lookahead " << sc.bridge.lookahead << " is far below the ~" << std::llround(expected)
               << " messages expected per step; consider a lookahead near " << std::llround(expected);
            warnings.push_back(os.str());
        }
    }
    if (sc.bridge.maxage.nanos() < 2 * sc.replay.data_spacing.nanos()) {
        warnings.push_back("maxage " + format_duration(sc.bridge.maxage) + " is below twice the data spacing " +
                           format_duration(sc.replay.data_spacing) + "; a single missing record will stall the output");
    }
    return warnings;
}

void apply_grid_param(Scenario& sc, const std::string& name, const std::string& value) {
    const std::string key = "grid." + name;
    YAML::Node n(value);
    if (name == "maxage") {
        sc.bridge.maxage = duration_of(n, key);
    } else if (name == "lookahead") {
        const auto la = int_of(n, key);
        if (la < 1) throw ValidationError(key, "must be at least 1");
        sc.bridge.lookahead = static_cast<std::size_t>(la);
    } else if (name == "policy") {
        sc.bridge.policy = wrap(key, [&] { return policy_from_string(value); });
    } else if (name == "ingest_mode") {
        if (value == "threaded") {
            sc.bridge.ingest_mode = IngestMode::Threaded;
        } else if (value == "unthreaded") {
            sc.bridge.ingest_mode = IngestMode::Unthreaded;
        } else {
            throw ValidationError(key, "expected threaded or unthreaded");
        }
    } else if (name == "step_size") {
        sc.step_size = duration_of(n, key);
    } else if (name == "injected_delay") {
        sc.injected_delay = duration_of(n, key);
    } else if (name == "data_spacing") {
        sc.replay.data_spacing = duration_of(n, key);
    } else if (name == "wall_period") {
        sc.replay.wall_period = duration_of(n, key);
    } else {
        throw ValidationError(key, "not a grid parameter");
    }
}

std::size_t ExperimentGrid::size() const {
    std::size_t n = 1;
    for (const auto& [name, values] : axes) n *= values.size();
    return n;
}

std::vector<GridCell> ExperimentGrid::cells() const {
    const std::size_t total = size();
    if (total > cap) {
        throw ValidationError("grid", std::to_string(total) + " cells exceed the cap of " + std::to_string(cap));
    }
    std::vector<GridCell> out;
    out.reserve(total);
    for (std::size_t i = 0; i < total; ++i) {
        GridCell cell;
        cell.index = i;
        cell.scenario = base;
        std::size_t rest = i;
        for (auto it = axes.rbegin(); it != axes.rend(); ++it) {
            const auto& [name, values] = *it;
            const std::string& v = values[rest % values.size()];
            rest /= values.size();
            cell.params[name] = v;
            apply_grid_param(cell.scenario, name, v);
        }
        cell.scenario.name = base.name + "#" + std::to_string(i);
        cell.scenario.validate();
        out.push_back(std::move(cell));
    }
    return out;
}

ExperimentGrid parse_grid(std::string_view yaml_text, const std::string& base_dir) {
    const YAML::Node root = load_yaml(yaml_text);
    check_keys(root, "", {"base", "grid", "cap"});
    ExperimentGrid g;
    if (!root["base"]) throw ValidationError("base", "required");
    if (root["base"].IsScalar()) {
        fs::path p = root["base"].Scalar();
        if (p.is_relative()) p = fs::path(base_dir) / p;
        g.base = load_scenario(p.string());
    } else {
        read_scenario(root["base"], g.base, base_dir);
        g.base.validate();
    }
    if (root["cap"]) g.cap = count_of(root["cap"], "cap");
    if (root["grid"]) {
        const auto& grid = root["grid"];
        check_keys(grid, "grid",
                   {"maxage", "lookahead", "policy", "ingest_mode", "step_size", "injected_delay", "data_spacing",
                    "wall_period"});
        for (const auto& kv : grid) {
            const auto name = kv.first.as<std::string>();
            if (!kv.second.IsSequence() || kv.second.size() == 0) {
                throw ValidationError("grid." + name, "expected a non-empty list");
            }
            std::vector<std::string> values;
            for (const auto& v : kv.second) values.push_back(scalar(v, "grid." + name));
            g.axes.emplace_back(name, std::move(values));
        }
    }
    return g;
}

ExperimentGrid load_grid(const std::string& path) { return parse_grid(read_file(path), parent_dir(path)); }

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
    out << kTraceHeader << '\n';
    for (const auto& r : trace.steps) {
        out << r.step_index << ',' << r.sim_time_end.nanos() << ',' << fmt_us(r.wall_duration) << ',' << r.consumed << ','
            << r.queue_len_exit << ',';
        if (r.out_seqno) out << *r.out_seqno;
        out << ',';
        if (r.out_ts) out << r.out_ts->nanos();
        out << ',' << (r.held ? 1 : 0) << ',' << r.published << ',' << r.dropped_so_far << '\n';
    }
}

void write_oracle_csv(std::ostream& out, const oracle::Outcome& outcome) {
    out << kOracleHeader << '\n';
    for (const auto& s : outcome.steps) {
        out << s.step << ',' << s.sim_time_end_ns << ',' << s.out_seqno << ',' << s.out_ts_ns << ',' << (s.held ? 1 : 0)
            << '\n';
    }
}

std::string project_trace_for_oracle(const RunTrace& trace) {
    std::ostringstream out;
    out << kOracleHeader << '\n';
    for (const auto& r : trace.steps) {
        out << r.step_index << ',' << r.sim_time_end.nanos() << ',' << r.out_seqno.value_or(0) << ','
            << (r.out_ts ? r.out_ts->nanos() : 0) << ',' << (r.held ? 1 : 0) << '\n';
    }
    return out.str();
}

void write_summary(std::ostream& out, const RunTrace& trace) {
    const TraceSummary s = trace.summary();
    out << "steps: " << s.steps << '\n'
        << "mean_wall_us: " << fmt_double(s.mean_wall_us) << '\n'
        << "p50_wall_us: " << fmt_double(s.p50_wall_us) << '\n'
        << "p99_wall_us: " << fmt_double(s.p99_wall_us) << '\n'
        << "max_wall_us: " << fmt_double(s.max_wall_us) << '\n'
        << "consumed: " << s.total_consumed << '\n'
        << "published: " << s.total_published << '\n'
        << "dropped: " << s.dropped << '\n'
        << "final_queue: " << s.final_queue << '\n'
        << "last_out_seqno: " << (s.last_out_seqno ? std::to_string(*s.last_out_seqno) : std::string("-")) << '\n';
    if (trace.timeout_step) out << "timeout_step: " << *trace.timeout_step << '\n';
}

}  // namespace cobridge
