"""Match-action pipeline: evaluate rules per response, emit verdicts, account metrics.

Each response is checked against the volume rule, the fragmentation rule and
the bailiwick rule in that order, stopping at the first that fires. A fired
rule truncates the packet; a nullified (non-first) fragment is dropped;
everything else is forwarded unchanged.

The pipeline consumes any iterable of :class:`DnsResponsePacket`, so a live
packet source can stand in for a capture file as long as it yields packets in
timestamp order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field, replace

from .mitigate import MissingQuestion, truncate
from .model import ATTACK, AUTHENTIC, BENIGN, LABELS, Action, DnsResponsePacket, Rule, Verdict
from .rules import DetectorState, rule1, rule2, rule3
from .sketch import CountMinSketch

log = logging.getLogger(__name__)

ALL_RULES = frozenset(Rule)


class UnsortedStream(ValueError):
    """Packet timestamps went backwards."""


@dataclass(frozen=True)
class EngineConfig:
    tau: int = 5
    check_interval: int = 1
    window_seconds: float = 1.0
    d: int = 5
    w: int = 200
    resolver_ip: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.tau < 1 or self.check_interval < 1:
            raise ValueError("tau and check_interval must be >= 1")
        if self.window_seconds <= 0:
            raise ValueError("window_seconds must be > 0")
        if self.d < 1 or self.w < 1:
            raise ValueError("d and w must be >= 1")

    def new_state(self) -> DetectorState:
        return DetectorState(
            cms=CountMinSketch(self.d, self.w, seed=self.seed),
            tau=self.tau,
            check_interval=self.check_interval,
            window=self.window_seconds,
        )


@dataclass
class RunMetrics:
    total: int = 0
    forwarded: int = 0
    truncated: int = 0
    dropped: int = 0
    malformed: int = 0
    missing_question: int = 0
    per_rule: dict[str, int] = field(default_factory=lambda: {r.value: 0 for r in Rule})
    attack_total: int = 0
    attack_forwarded: int = 0
    benign_total: int = 0
    benign_flagged: int = 0
    asr: float = 0.0
    fp_rate: float = 0.0
    first_flag_index: int | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


class Pipeline:
    """One detector instance over one resolver-bound stream."""

    def __init__(self, config: EngineConfig | None = None, rules: Iterable[Rule] = ALL_RULES) -> None:
        self.config = config or EngineConfig()
        self.state = self.config.new_state()
        self.rules = frozenset(Rule(r) for r in rules)
        self._last_ts: float | None = None
        self._index = 0
        self.missing_question = 0

    def evaluate(self, p: DnsResponsePacket) -> tuple[Rule | None, bool]:
        """Return ``(fired_rule, nullified)`` for one packet."""
        if Rule.R1 in self.rules and p.qname is not None:
            if rule1(self.state, p):
                return Rule.R1, False
        if Rule.R2 in self.rules:
            flag, drop = rule2(p)
            if flag:
                return Rule.R2, False
            if drop:
                return Rule.R2, True
        if Rule.R3 in self.rules and p.has_sections:
            if rule3(p):
                return Rule.R3, False
        return None, False

    def handle(self, p: DnsResponsePacket, materialize: bool = True) -> tuple[Verdict, DnsResponsePacket | None]:
        """Process one packet; return its verdict and the packet to send on (if any).

        With ``materialize=False`` truncated packets are not built (the verdict
        is unaffected) and ``None`` is returned in their place.
        """
        if self._last_ts is not None and p.timestamp < self._last_ts:
            raise UnsortedStream(f"timestamp {p.timestamp} after {self._last_ts} at packet {self._index}")
        self._last_ts = p.timestamp
        index = self._index
        self._index += 1
        fired, nullified = self.evaluate(p)
        if fired is None:
            return Verdict(Action.FORWARD, None, index), p
        if nullified:
            return Verdict(Action.DROP, fired, index), None
        if p.qname is None:
            self.missing_question += 1
            return Verdict(Action.DROP, fired, index), None
        if not materialize:
            return Verdict(Action.TRUNCATE, fired, index), None
        try:
            out = truncate(p)
        except MissingQuestion:
            self.missing_question += 1
            log.debug("packet %d flagged by %s but has no question; dropping", index, fired.value)
            return Verdict(Action.DROP, fired, index), None
        return Verdict(Action.TRUNCATE, fired, index), out


def process(
    config: EngineConfig,
    stream: Iterable[DnsResponsePacket],
    labels: Sequence[str] | None = None,
    *,
    intended_total: int | None = None,
    rules: Iterable[Rule] = ALL_RULES,
    emitted: list[DnsResponsePacket] | None = None,
    malformed: int = 0,
) -> tuple[list[Verdict], RunMetrics]:
    """Run the pipeline over ``stream``; optionally collect sent packets in ``emitted``."""
    pipeline = Pipeline(config, rules)
    verdicts = []
    materialize = emitted is not None
    for p in stream:
        verdict, out = pipeline.handle(p, materialize)
        verdicts.append(verdict)
        if materialize and out is not None:
            emitted.append(out)
    metrics = summarize(verdicts, labels, intended_total=intended_total)
    metrics.malformed = malformed
    metrics.missing_question = pipeline.missing_question
    return verdicts, metrics


def summarize(
    verdicts: Sequence[Verdict], labels: Sequence[str] | None = None, *, intended_total: int | None = None
) -> RunMetrics:
    m = RunMetrics(total=len(verdicts))
    for v in verdicts:
        if v.action is Action.FORWARD:
            m.forwarded += 1
        elif v.action is Action.TRUNCATE:
            m.truncated += 1
        else:
            m.dropped += 1
        if v.fired_rule is not None:
            m.per_rule[v.fired_rule.value] += 1
    if labels is None:
        return m
    if len(labels) != len(verdicts):
        raise ValueError(f"{len(labels)} labels for {len(verdicts)} packets")
    for v, label in zip(verdicts, labels):
        if label == ATTACK:
            m.attack_total += 1
            if v.action is Action.FORWARD:
                m.attack_forwarded += 1
            elif m.first_flag_index is None:
                m.first_flag_index = v.packet_index
        elif label == BENIGN:
            m.benign_total += 1
            if v.action is not Action.FORWARD:
                m.benign_flagged += 1
    m.asr = compute_asr(labels, verdicts, intended_total if intended_total is not None else m.attack_total)
    m.fp_rate = compute_fp(labels, verdicts)
    return m


def compute_asr(labels: Sequence[str], verdicts: Sequence[Verdict], intended_total: int) -> float:
    """Fraction of the attacker's intended packets that were forwarded."""
    if intended_total <= 0:
        return 0.0
    passed = sum(1 for v, label in zip(verdicts, labels) if label == ATTACK and v.action is Action.FORWARD)
    return passed / intended_total


def compute_fp(labels: Sequence[str], verdicts: Sequence[Verdict]) -> float:
    """Fraction of benign packets that were truncated or dropped."""
    benign = flagged = 0
    for v, label in zip(verdicts, labels):
        if label == BENIGN:
            benign += 1
            flagged += v.action is not Action.FORWARD
    return flagged / benign if benign else 0.0


VERDICT_FIELDS = ("packet_index", "timestamp", "qname", "action", "rule")


def verdicts_csv(stream: Sequence[DnsResponsePacket], verdicts: Sequence[Verdict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(VERDICT_FIELDS)
    for p, v in zip(stream, verdicts):
        rule = v.fired_rule.value if v.fired_rule else ""
        qname = str(p.qname) if p.qname is not None else ""
        writer.writerow([v.packet_index, f"{p.timestamp:.6f}", qname, v.action.value, rule])
    return buf.getvalue()


def metrics_csv(metrics: RunMetrics) -> str:
    row = asdict(metrics)
    per_rule = row.pop("per_rule")
    row.update({f"rule_{k}": v for k, v in per_rule.items()})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
    writer.writeheader()
    writer.writerow(row)
    return buf.getvalue()


@dataclass
class SweepRow:
    d: int
    w: int
    repeats: int
    fp_rate: float
    fp_min: float
    fp_max: float
    asr: float
    forwarded_attack: float
    first_flag_index: float | None


SWEEP_FIELDS = ("d", "w", "repeats", "fp_rate", "fp_min", "fp_max", "asr", "forwarded_attack", "first_flag_index")


def _sweep_repeat(args) -> list[tuple[int, int, RunMetrics]]:
    from .trafficgen import generate

    spec, base, grid = args
    stream = generate(spec)
    out = []
    for d, w in grid:
        config = EngineConfig(**{**asdict(base), "d": d, "w": w})
        _, m = process(config, stream.packets, stream.labels, intended_total=stream.intended_total)
        out.append((d, w, m))
    return out


def sweep(
    spec,
    d_grid: Sequence[int] = (2, 3, 4, 5),
    w_grid: Sequence[int] = (100, 200, 500),
    repeats: int = 1,
    base: EngineConfig | None = None,
    workers: int = 1,
) -> list[SweepRow]:
    """Average RunMetrics over ``repeats`` seeded scenario instances per (d, w).

    Repeat ``r`` uses scenario seed ``spec.seed + r`` and hash seed
    ``base.seed + r``; each generated stream is shared by every grid point.
    """
    if repeats < 1 or not d_grid or not w_grid:
        raise ValueError("need repeats >= 1 and non-empty grids")
    base = base or EngineConfig()
    grid = [(d, w) for w in w_grid for d in d_grid]
    jobs = [(replace(spec, seed=spec.seed + r), replace(base, seed=base.seed + r), grid) for r in range(repeats)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_sweep_repeat, jobs))
    else:
        results = [_sweep_repeat(job) for job in jobs]
    rows = []
    for i, (d, w) in enumerate(grid):
        ms = [res[i][2] for res in results]
        fps = [m.fp_rate for m in ms]
        firsts = [m.first_flag_index for m in ms if m.first_flag_index is not None]
        rows.append(
            SweepRow(
                d=d,
                w=w,
                repeats=repeats,
                fp_rate=sum(fps) / repeats,
                fp_min=min(fps),
                fp_max=max(fps),
                asr=sum(m.asr for m in ms) / repeats,
                forwarded_attack=sum(m.attack_forwarded for m in ms) / repeats,
                first_flag_index=sum(firsts) / len(firsts) if firsts else None,
            )
        )
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_FIELDS)
    for r in rows:
        values = (getattr(r, f) for f in SWEEP_FIELDS)
        writer.writerow([repr(v) if isinstance(v, float) else ("" if v is None else v) for v in values])
    return buf.getvalue()
