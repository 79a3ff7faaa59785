"""DNS cache-poisoning detection and TC-flag mitigation over response streams."""

from .engine import EngineConfig, Pipeline, RunMetrics, process, sweep
from .mitigate import truncate
from .model import (
    Action,
    DnsResponsePacket,
    DomainName,
    FragmentInfo,
    ResourceRecord,
    Rule,
    Verdict,
    decode_response,
    encode_response,
    is_within_bailiwick,
)
from .rules import DetectorState, rule1, rule2, rule3
from .sketch import CountMinSketch

__version__ = "0.1.0"

__all__ = [
    "Action",
    "CountMinSketch",
    "DetectorState",
    "DnsResponsePacket",
    "DomainName",
    "EngineConfig",
    "FragmentInfo",
    "Pipeline",
    "ResourceRecord",
    "Rule",
    "RunMetrics",
    "Verdict",
    "decode_response",
    "encode_response",
    "is_within_bailiwick",
    "process",
    "rule1",
    "rule2",
    "rule3",
    "sweep",
    "truncate",
]
