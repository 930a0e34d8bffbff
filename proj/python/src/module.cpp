// Python bindings: timestamps, record codec, selection policy, oracle, monitor and scenario runs.

#include "cobridge/config.hpp"
#include "cobridge/monitor.hpp"
#include "cobridge/oracle.hpp"
#include "cobridge/orchestrator.hpp"
#include "cobridge/policy.hpp"
#include "cobridge/record.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace cobridge;

namespace {

py::object to_py(const Value& v) {
    switch (v.kind()) {
        case ValueKind::Integer: return py::int_(v.as_integer());
        case ValueKind::Real: return py::float_(v.as_real());
        case ValueKind::Boolean: return py::bool_(v.as_boolean());
        case ValueKind::Text: return py::str(v.as_text());
    }
    return py::none();
}

Value from_py(const py::handle& h) {
    // bool is a subclass of int in Python, so test it first.
    if (py::isinstance<py::bool_>(h)) return Value(h.cast<bool>());
    if (py::isinstance<py::int_>(h)) return Value(h.cast<std::int64_t>());
    if (py::isinstance<py::float_>(h)) return Value(h.cast<double>());
    if (py::isinstance<py::str>(h)) return Value(h.cast<std::string>());
    throw py::type_error("record values must be int, float, bool or str");
}

py::dict record_to_dict(const TimestampedRecord& r) {
    py::dict values;
    for (const auto& [k, v] : r.values) values[py::str(k)] = to_py(v);
    py::dict d;
    d["seqno"] = r.seqno;
    d["timestamp"] = r.data_ts;
    d["values"] = values;
    return d;
}

TimestampedRecord record_from_args(std::uint64_t seqno, EpochNanos timestamp, const py::dict& values) {
    TimestampedRecord r;
    r.seqno = seqno;
    r.data_ts = timestamp;
    for (const auto& [k, v] : values) r.values.emplace(k.cast<std::string>(), from_py(v));
    return r;
}

py::dict step_to_dict(const StepReport& s) {
    py::dict d;
    d["step"] = s.step_index;
    d["sim_time_ns"] = s.sim_time_end.nanos();
    d["wall_us"] = static_cast<double>(s.wall_duration.nanos()) / 1000.0;
    d["consumed"] = s.consumed;
    d["queue_len_exit"] = s.queue_len_exit;
    d["out_seqno"] = s.out_seqno ? py::object(py::int_(*s.out_seqno)) : py::object(py::none());
    d["out_ts_ns"] = s.out_ts ? py::object(py::int_(s.out_ts->nanos())) : py::object(py::none());
    d["held"] = s.held;
    d["published"] = s.published;
    d["dropped"] = s.dropped_so_far;
    return d;
}

py::dict trace_to_dict(const RunTrace& t) {
    py::list steps;
    for (const auto& s : t.steps) steps.append(step_to_dict(s));
    py::list monitor;
    for (const auto& m : t.monitor) {
        py::dict d;
        d["step"] = m.step;
        d["distance"] = m.distance;
        d["stop"] = m.stop;
        monitor.append(d);
    }
    py::list outbound;
    for (const auto& o : t.outbound) {
        py::dict d = record_to_dict(o.record);
        d["step"] = o.step;
        outbound.append(d);
    }
    std::ostringstream csv;
    write_trace_csv(csv, t);
    py::dict d;
    d["steps"] = steps;
    d["monitor"] = monitor;
    d["outbound"] = outbound;
    d["timeout_step"] = t.timeout_step ? py::object(py::int_(*t.timeout_step)) : py::object(py::none());
    d["timeout_message"] = t.timeout_message;
    d["trace_csv"] = csv.str();
    return d;
}

py::dict oracle_to_dict(const oracle::Outcome& o) {
    py::list steps;
    for (const auto& s : o.steps) {
        py::dict d;
        d["step"] = s.step;
        d["sim_time_ns"] = s.sim_time_end_ns;
        d["out_seqno"] = s.out_seqno;
        d["out_ts_ns"] = s.out_ts_ns;
        d["held"] = s.held;
        d["consumed"] = s.consumed;
        steps.append(d);
    }
    py::dict d;
    d["steps"] = steps;
    d["timeout_step"] = o.timeout_step ? py::object(py::int_(*o.timeout_step)) : py::object(py::none());
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Co-simulation data bridge core";

    auto error = py::register_exception<Error>(m, "Error");
    py::register_exception<ParseError>(m, "ParseError", error.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", error.ptr());
    py::register_exception<EncodeError>(m, "EncodeError", error.ptr());
    py::register_exception<DecodeError>(m, "DecodeError", error.ptr());
    py::register_exception<TransportError>(m, "TransportError", error.ptr());
    py::register_exception<UsageError>(m, "UsageError", error.ptr());

    m.def("parse_timestamp", [](const std::string& s) { return parse_timestamp(s); }, py::arg("text"),
          "ISO-8601 UTC timestamp to nanoseconds since the Unix epoch.");
    m.def("format_timestamp", &format_timestamp, py::arg("ns"), "Nanoseconds since the epoch to ISO-8601 UTC.");
    m.def("parse_duration", [](const std::string& s) { return parse_duration(s).nanos(); }, py::arg("text"),
          "Duration such as '100ms' or '0.5s' to nanoseconds.");
    m.def("format_duration", [](std::int64_t ns) { return format_duration(Duration(ns)); }, py::arg("ns"));

    m.def("encode_record",
          [](std::uint64_t seqno, EpochNanos timestamp, const py::dict& values) {
              return py::bytes(encode_record(record_from_args(seqno, timestamp, values)));
          },
          py::arg("seqno"), py::arg("timestamp"), py::arg("values"), "Encode a record as a JSON payload.");
    m.def("decode_record", [](const py::bytes& payload) { return record_to_dict(decode_record(std::string(payload))); },
          py::arg("payload"), "Decode a JSON payload into {'seqno', 'timestamp', 'values'}.");

    m.def("select_output",
          [](const std::vector<std::int64_t>& available, std::optional<std::int64_t> current, std::int64_t horizon,
             const std::string& policy, std::int64_t maxage, std::size_t lookahead) -> py::tuple {
              std::vector<SimTime> avail(available.begin(), available.end());
              const auto cur = current ? std::optional<SimTime>(SimTime(*current)) : std::nullopt;
              const Decision d =
                  select_output(avail, cur, SimTime(horizon), policy_from_string(policy), Duration(maxage), lookahead);
              switch (d.kind) {
                  case Decision::Kind::Hold: return py::make_tuple("hold", 0);
                  case Decision::Kind::NeedData: return py::make_tuple("need_data", 0);
                  case Decision::Kind::Advance: return py::make_tuple("advance", d.consumed);
              }
              return py::make_tuple("need_data", 0);
          },
          py::arg("available"), py::arg("current"), py::arg("horizon"), py::arg("policy"), py::arg("maxage"),
          py::arg("lookahead"),
          "Selection decision as ('hold' | 'advance' | 'need_data', consumed). Times in nanoseconds.");

    m.def("oracle_outputs",
          [](const std::vector<std::tuple<std::uint64_t, std::int64_t, std::int64_t>>& records, std::int64_t start,
             std::int64_t step, std::size_t n_steps, std::int64_t delay, std::int64_t timeout, const std::string& policy,
             std::int64_t maxage, std::size_t lookahead) {
              std::vector<oracle::Record> recs;
              for (const auto& [seq, t, avail] : records) recs.push_back({seq, t, avail});
              return oracle_to_dict(oracle::outputs(recs, {start, step, n_steps, delay, timeout},
                                                    {policy_from_string(policy), maxage, lookahead}));
          },
          py::arg("records"), py::arg("start"), py::arg("step"), py::arg("n_steps"), py::arg("delay"),
          py::arg("timeout"), py::arg("policy"), py::arg("maxage"), py::arg("lookahead"),
          "Reference outputs for records given as (seqno, sim_time_ns, available_ns) tuples.");

    m.def("monitor_step",
          [](double x_r, double y_r, double x_o, double y_o, double threshold) {
              const auto r = monitor_step(x_r, y_r, x_o, y_o, threshold);
              return py::make_tuple(r.distance, r.stop);
          },
          py::arg("x_r"), py::arg("y_r"), py::arg("x_o"), py::arg("y_o"), py::arg("threshold") = 1.0,
          "Distance between robot and obstacle, and whether it is below the threshold.");

    m.def("validate_config", [](const std::string& yaml, const std::string& base_dir) {
              return validate_config(parse_scenario(yaml, base_dir));
          },
          py::arg("yaml"), py::arg("base_dir") = ".", "Guideline warnings for a scenario document.");

    m.def("run_scenario",
          [](const std::string& yaml, const std::string& base_dir) {
              const Scenario sc = parse_scenario(yaml, base_dir);
              RunTrace trace;
              {
                  py::gil_scoped_release release;
                  trace = run(sc);
              }
              return trace_to_dict(trace);
          },
          py::arg("yaml"), py::arg("base_dir") = ".", "Run a scenario document and return its trace.");

    m.def("oracle_for_scenario",
          [](const std::string& yaml, const std::string& base_dir) {
              return oracle_to_dict(oracle_for(parse_scenario(yaml, base_dir)));
          },
          py::arg("yaml"), py::arg("base_dir") = ".", "Reference outputs for a scenario document.");
}
