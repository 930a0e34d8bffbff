#pragma once

#include "cobridge/time.hpp"
#include "cobridge/value.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace cobridge {

/// One external message: data timestamp, sequence number and named values.
struct TimestampedRecord {
    EpochNanos data_ts = 0;
    std::uint64_t seqno = 0;
    std::map<std::string, Value> values;

    bool operator==(const TimestampedRecord&) const = default;
};

/// Canonical JSON payload:
/// `{"timestamp":"<ISO-8601>","seqno":<int>,"values":{<sorted name>:<value>,...}}`.
/// Throws EncodeError for non-finite reals or an empty value map.
std::string encode_record(const TimestampedRecord& rec);

/// Inverse of encode_record. Whitespace and unknown top-level keys are tolerated. JSON
/// integers decode as integer values, JSON numbers with a fraction or exponent as reals.
/// Throws DecodeError with the byte offset of the problem.
TimestampedRecord decode_record(std::string_view payload);

}  // namespace cobridge
