#include "cobridge/record.hpp"

#include "cobridge/error.hpp"

#include <json.hpp>

#include <cmath>

namespace cobridge {

namespace {

using nlohmann::json;

json to_json(const std::string& name, const Value& v) {
    switch (v.kind()) {
        case ValueKind::Integer: return v.as_integer();
        case ValueKind::Real:
            if (!std::isfinite(v.as_real())) throw EncodeError("value '" + name + "' is not finite");
            return v.as_real();
        case ValueKind::Boolean: return v.as_boolean();
        case ValueKind::Text: return v.as_text();
    }
    throw EncodeError("value '" + name + "' has no kind");
}

std::size_t offset_of_key(std::string_view payload, std::string_view key) {
    const std::string quoted = "\"" + std::string(key) + "\"";
    const auto pos = payload.find(quoted);
    return pos == std::string_view::npos ? payload.size() : pos;
}

}  // namespace

std::string encode_record(const TimestampedRecord& rec) {
    if (rec.values.empty()) throw EncodeError("record has no values");
    std::string out;
    out.reserve(64 + rec.values.size() * 24);
    out += R"({"timestamp":")";
    out += format_timestamp(rec.data_ts);
    out += R"(","seqno":)";
    out += std::to_string(rec.seqno);
    out += R"(,"values":{)";
    bool first = true;
    for (const auto& [name, value] : rec.values) {  // std::map iterates in sorted order
        if (!first) out += ',';
        first = false;
        out += json(name).dump();
        out += ':';
        out += to_json(name, value).dump();
    }
    out += "}}";
    return out;
}

TimestampedRecord decode_record(std::string_view payload) {
    json doc;
    try {
        doc = json::parse(payload.begin(), payload.end());
    } catch (const json::parse_error& e) {
        throw DecodeError(std::string("malformed JSON: ") + e.what(), e.byte == 0 ? 0 : e.byte - 1);
    }
    if (!doc.is_object()) throw DecodeError("payload is not a JSON object", 0);

    TimestampedRecord rec;

    const auto ts = doc.find("timestamp");
    if (ts == doc.end()) throw DecodeError("missing field timestamp", payload.size());
    if (!ts->is_string()) throw DecodeError("field timestamp is not a string", offset_of_key(payload, "timestamp"));
    try {
        rec.data_ts = parse_timestamp(ts->get_ref<const std::string&>());
    } catch (const ParseError& e) {
        throw DecodeError(std::string("bad timestamp: ") + e.what(), offset_of_key(payload, "timestamp"));
    }

    const auto seq = doc.find("seqno");
    if (seq == doc.end()) throw DecodeError("missing field seqno", payload.size());
    if (!seq->is_number_unsigned()) {
        throw DecodeError("field seqno is not a non-negative integer", offset_of_key(payload, "seqno"));
    }
    rec.seqno = seq->get<std::uint64_t>();

    const auto values = doc.find("values");
    if (values == doc.end()) throw DecodeError("missing field values", payload.size());
    if (!values->is_object()) throw DecodeError("field values is not an object", offset_of_key(payload, "values"));
    if (values->empty()) throw DecodeError("field values is empty", offset_of_key(payload, "values"));

    for (const auto& [name, v] : values->items()) {
        if (v.is_boolean()) {
            rec.values.emplace(name, Value(v.get<bool>()));
        } else if (v.is_number_integer()) {
            rec.values.emplace(name, Value(v.get<std::int64_t>()));
        } else if (v.is_number_float()) {
            rec.values.emplace(name, Value(v.get<double>()));
        } else if (v.is_string()) {
            rec.values.emplace(name, Value(v.get<std::string>()));
        } else {
            throw DecodeError("value '" + name + "' has unsupported JSON type", offset_of_key(payload, name));
        }
    }
    return rec;
}

}  // namespace cobridge
