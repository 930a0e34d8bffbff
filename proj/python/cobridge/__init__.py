"""Co-simulation data bridge: timestamps, record codec, selection policy and scenario runs."""

from ._core import (
    DecodeError,
    EncodeError,
    Error,
    ParseError,
    TransportError,
    UsageError,
    ValidationError,
    decode_record,
    encode_record,
    format_duration,
    format_timestamp,
    monitor_step,
    oracle_for_scenario,
    oracle_outputs,
    parse_duration,
    parse_timestamp,
    run_scenario,
    select_output,
    validate_config,
)

__all__ = [
    "DecodeError",
    "EncodeError",
    "Error",
    "ParseError",
    "TransportError",
    "UsageError",
    "ValidationError",
    "decode_record",
    "encode_record",
    "format_duration",
    "format_timestamp",
    "monitor_step",
    "oracle_for_scenario",
    "oracle_outputs",
    "parse_duration",
    "parse_timestamp",
    "run_scenario",
    "select_output",
    "validate_config",
]
