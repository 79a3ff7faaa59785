"""The three detection predicates evaluated on every response.

* :func:`rule1` - per-qname volume over a tumbling window (Count-Min Sketch).
* :func:`rule2` - IPv4 fragmentation: flag first fragments, nullify the rest.
* :func:`rule3` - bailiwick compliance of every record section.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import TYPE_OPT, DnsResponsePacket, is_within_bailiwick
from .sketch import CountMinSketch


@dataclass
class DetectorState:
    """Mutable state shared across packets of one stream.

    ``t`` is ``None`` until the first packet starts the first window.
    """

    cms: CountMinSketch = field(default_factory=CountMinSketch)
    tau: int = 5
    check_interval: int = 1
    window: float = 1.0
    count: int = 0
    t: float | None = None
    domain_map: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if self.tau < 1 or self.check_interval < 1 or self.window <= 0:
            raise ValueError("tau and check_interval must be >= 1 and window > 0")

    def roll(self, now: float) -> None:
        self.cms.reset()
        self.count = 0
        self.domain_map.clear()
        self.t = now


def rule1(state: DetectorState, p: DnsResponsePacket) -> bool:
    """Count the response's qname and flag it once its estimate exceeds tau.

    The flagged path returns before the packet counter advances and before
    the window clock is consulted, so a window only rolls on an unflagged
    packet arriving at least ``window`` seconds after the current start.
    """
    if p.qname is None:
        return False
    key = str(p.qname)
    if state.t is None:
        state.t = p.timestamp
    cms = state.cms
    cms.add(key)
    if state.count % state.check_interval == 0 and cms.estimate(key) > state.tau:
        if key in state.domain_map:
            return True
        state.domain_map.add(key)
        return True
    state.count += 1
    if p.timestamp - state.t >= state.window:
        state.roll(p.timestamp)
    return False


def rule2(p: DnsResponsePacket) -> tuple[bool, bool]:
    """Return ``(flag, drop)``: flag first fragments, drop later fragments."""
    frag = p.fragment
    if frag is None:
        return False, False
    if frag.offset == 0 and frag.more_fragments:
        return True, False
    if frag.offset > 0:
        return False, True
    return False, False


def rule3(p: DnsResponsePacket) -> bool:
    """True when any record falls outside the queried name's bailiwick.

    Answers and additional records must sit under the qname; for authority
    records the qname must sit under the record owner. OPT pseudo-records
    carry no owner name and are skipped.
    """
    qname = p.qname
    if qname is None:
        return False
    for rr in p.answers:
        if not is_within_bailiwick(rr.name, qname):
            return True
    for rr in p.authority:
        if not is_within_bailiwick(qname, rr.name):
            return True
    for rr in p.additional:
        if rr.rtype == TYPE_OPT:
            continue
        if not is_within_bailiwick(rr.name, qname):
            return True
    return False
