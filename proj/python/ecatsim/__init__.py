"""Python bindings for the ecatsim fieldbus simulator."""

from ._core import (
    AlState,
    Cia402State,
    Command,
    Config,
    Datagram,
    ServoRxPdo,
    ServoTxPdo,
    SlaveInfo,
    TimingStats,
    MetricStats,
    cia402_transition,
    decode_frame,
    encode_frame,
    pack_servo_rx,
    pack_servo_tx,
    parse_config,
    render_report,
    run_bench,
    scan,
    stats_from_periods,
    unpack_servo_rx,
    unpack_servo_tx,
)

__all__ = [
    "AlState",
    "Cia402State",
    "Command",
    "Config",
    "Datagram",
    "MetricStats",
    "ServoRxPdo",
    "ServoTxPdo",
    "SlaveInfo",
    "TimingStats",
    "cia402_transition",
    "decode_frame",
    "encode_frame",
    "pack_servo_rx",
    "pack_servo_tx",
    "parse_config",
    "render_report",
    "run_bench",
    "scan",
    "stats_from_periods",
    "unpack_servo_rx",
    "unpack_servo_tx",
]
