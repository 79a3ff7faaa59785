"""Seeded synthesis of labeled response streams for the attack scenarios.

Every generator is a pure function of its :class:`ScenarioSpec`: the same
spec (seed included) always yields the same packets in the same order.
Timestamps are whole microseconds so they survive a pcap round trip.
"""

from __future__ import annotations

import enum
import random
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field, replace
from pathlib import Path

from .model import (
    ATTACK,
    AUTHENTIC,
    BENIGN,
    FLAG_AA,
    FLAG_QR,
    FLAG_RA,
    FLAG_RD,
    TYPE_A,
    TYPE_AAAA,
    TYPE_SOA,
    DnsResponsePacket,
    DomainName,
    FragmentInfo,
    ResourceRecord,
    decode_response,
    ipv4_packet,
    name,
    udp_datagram,
)

US = 1_000_000
_RESPONSE_FLAGS = FLAG_QR | FLAG_AA | FLAG_RD | FLAG_RA
_TLDS = ("com",) * 10 + ("net",) * 3 + ("org",) * 3 + ("io", "de", "uk", "ru", "br", "jp", "fr", "info")
_ALPHABET = "abcdefghijklmnopqrstuvwxyz0123456789"

# noise packets per second next to an attack: the full 1,000-packet noise
# budget lands inside one detection window
MIXED_NOISE_PPS = 1000.0
# campus resolver capture: ~6M responses over 1.5 days
BENIGN_PPS = 6_000_000 / (1.5 * 86400)

# answer-only / answer+authority / no answer / all three sections
SHAPES = ("answer", "answer_authority", "no_answer", "all")
SHAPE_WEIGHTS = (0.46, 0.26, 0.22, 0.06)


class MissingDomainList(ValueError):
    """Benign traffic was requested without any domains to draw from."""


class ScenarioKind(str, enum.Enum):
    S_ATTACK = "s"
    FRAG_ATTACK = "frag"
    OOB_ATTACK = "oob"
    BENIGN_ONLY = "benign"
    INTERLEAVED = "interleaved"


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one synthetic scenario.

    ``noise_domains=None`` draws a synthetic ranked-domain list from the seed;
    an explicit empty tuple with ``noise_count > 0`` is an error.
    ``noise_rate_pps`` sets the benign arrival rate (uniform arrivals); left
    as ``None`` it is :data:`MIXED_NOISE_PPS` alongside an attack and
    :data:`BENIGN_PPS` for benign-only traffic.
    """

    kind: ScenarioKind = ScenarioKind.INTERLEAVED
    seed: int = 0
    attack_domain: str = "victim.com"
    attack_count: int = 65535
    attack_window_ms: float = 400.0
    noise_count: int = 1000
    noise_domains: tuple[str, ...] | None = None
    noise_rate_pps: float | None = None
    resolver_ip: str = "10.0.0.53"
    auth_ip: str = "198.51.100.53"
    attacker_ip: str = "203.0.113.66"
    oob_variant: str = "additional"
    oob_target: str = "bank.com"
    frag_mtu: int = 576

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if not 0 <= self.attack_count <= 65535:
            raise ValueError("attack_count must lie in [0, 65535] (the TXID space minus the real one)")
        if self.noise_count < 0:
            raise ValueError("noise_count must be >= 0")
        if (self.noise_rate_pps is not None and self.noise_rate_pps <= 0) or self.attack_window_ms <= 0:
            raise ValueError("rates and windows must be positive")
        if self.oob_variant not in ("additional", "tld"):
            raise ValueError(f"unknown oob_variant {self.oob_variant!r}")


    @property
    def noise_rate(self) -> float:
        if self.noise_rate_pps is not None:
            return self.noise_rate_pps
        return BENIGN_PPS if self.kind is ScenarioKind.BENIGN_ONLY else MIXED_NOISE_PPS


@dataclass
class LabeledStream:
    packets: list[DnsResponsePacket] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)
    intended_total: int = 0

    def __len__(self) -> int:
        return len(self.packets)

    def __iter__(self) -> Iterator[DnsResponsePacket]:
        return iter(self.packets)

    def count(self, label: str) -> int:
        return sum(1 for x in self.labels if x == label)


def _merge(events: list[tuple[int, int, DnsResponsePacket, str]], intended: int) -> LabeledStream:
    events.sort(key=lambda e: (e[0], e[1]))
    return LabeledStream([e[2] for e in events], [e[3] for e in events], intended)


def synthetic_domains(count: int, seed: int = 0) -> list[str]:
    """A ranked list of distinct registrable-looking domains."""
    rng = random.Random(f"domains:{seed}")
    out: list[str] = []
    seen: set[str] = set()
    while len(out) < count:
        label = "".join(rng.choice(_ALPHABET[:26]) for _ in range(rng.randint(4, 12)))
        domain = f"{label}.{rng.choice(_TLDS)}"
        if domain not in seen:
            seen.add(domain)
            out.append(domain)
    return out


def load_domain_list(path: str | Path) -> list[str]:
    """Read a ranked domain list: one domain per line, or ``rank,domain`` CSV."""
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        out.append(line.split(",")[-1].strip().rstrip("."))
    return out


def _domains(spec: ScenarioSpec, needed: int) -> list[str]:
    if spec.noise_domains is not None:
        if needed and not spec.noise_domains:
            raise MissingDomainList("noise_count > 0 but the domain list is empty")
        return list(spec.noise_domains)
    return synthetic_domains(max(needed, 1), spec.seed)


def _rand_ip(rng: random.Random) -> str:
    return f"{rng.choice((192, 198, 199, 203))}.{rng.randint(0, 255)}.{rng.randint(0, 255)}.{rng.randint(1, 254)}"


def _benign_response(
    rng: random.Random, qname: DomainName, ts_us: int, resolver_ip: str, shape: str
) -> DnsResponsePacket:
    """A bailiwick-compliant response in one of the four section shapes."""
    zone = DomainName(qname.labels[-2:]) if len(qname) >= 2 else qname
    answers: tuple[ResourceRecord, ...] = ()
    authority: tuple[ResourceRecord, ...] = ()
    additional: tuple[ResourceRecord, ...] = ()
    qtype = TYPE_A
    if shape in ("answer", "answer_authority", "all"):
        answers = tuple(ResourceRecord.a(qname, _rand_ip(rng), rng.choice((60, 300, 3600))) for _ in range(rng.randint(1, 2)))
    if shape in ("answer_authority", "all"):
        authority = tuple(ResourceRecord.ns(zone, f"ns{i}.{zone}") for i in (1, 2))
    if shape == "all":
        additional = (ResourceRecord.aaaa(qname, "2001:db8::%x" % rng.getrandbits(16)),)
    if shape == "no_answer":
        qtype = TYPE_AAAA
        soa_rdata = name(f"ns1.{zone}").to_wire() + name(f"hostmaster.{zone}").to_wire() + bytes(20)
        authority = (ResourceRecord(zone, TYPE_SOA, 900, soa_rdata),)
    p = DnsResponsePacket(
        timestamp=ts_us / US,
        src_ip=_rand_ip(rng),
        dst_ip=resolver_ip,
        src_port=53,
        dst_port=rng.randint(1024, 65535),
        txid=rng.getrandbits(16),
        qname=qname,
        qtype=qtype,
        flags=_RESPONSE_FLAGS,
        answers=answers,
        authority=authority,
        additional=additional,
        fragment=FragmentInfo(0, False, rng.getrandbits(16)),
    )
    return p.with_len()


def _noise_events(
    spec: ScenarioSpec, rng: random.Random, start_us: int, repeats: bool
) -> list[tuple[int, int, DnsResponsePacket, str]]:
    """Benign responses arriving uniformly at ``noise_rate_pps`` from ``start_us``.

    With ``repeats`` each qname gets one or two responses; otherwise every
    noise packet has a distinct qname. Domains are drawn without replacement.
    """
    n = spec.noise_count
    if n == 0:
        return []
    pool = _domains(spec, n)
    span_us = max(1, round(n / spec.noise_rate * US))
    events = []
    order = 0
    remaining = n
    domains = rng.sample(pool, len(pool))
    di = 0
    while remaining > 0:
        if di == len(domains):
            domains = rng.sample(pool, len(pool))
            di = 0
        qname = name(domains[di])
        di += 1
        if repeats and rng.random() < 0.5 and rng.random() < 0.5:
            qname = DomainName(("www",) + qname.labels)
        copies = min(remaining, rng.randint(1, 2) if repeats else 1)
        shape = rng.choices(SHAPES, SHAPE_WEIGHTS)[0]
        ts = start_us + rng.randrange(span_us)
        for c in range(copies):
            # a second response for the same name follows within 50 ms
            t = ts if c == 0 else ts + rng.randrange(50_000)
            events.append((t, order, _benign_response(rng, qname, t, spec.resolver_ip, shape), BENIGN))
            order += 1
        remaining -= copies
    return events


def gen_s_attack(spec: ScenarioSpec) -> LabeledStream:
    """TXID sweep: spoofed answers for one query, the authentic answer, optional noise.

    The client query goes out at t=0. Spoofed responses carry the real source
    address and port and every TXID except the real one, spread evenly over
    ``attack_window_ms`` starting at 1 ms; the authentic reply lands just
    after the sweep.
    """
    rng = random.Random(f"s:{spec.seed}")
    qname = name(spec.attack_domain)
    real_txid = rng.getrandbits(16)
    port = rng.randint(1024, 65535)
    guesses = [t for t in range(65536) if t != real_txid]
    rng.shuffle(guesses)
    forged = (ResourceRecord.a(qname, spec.attacker_ip, 86400),)
    start_us = 1000
    window_us = round(spec.attack_window_ms * 1000)
    template = DnsResponsePacket(
        timestamp=0.0,
        src_ip=spec.auth_ip,
        dst_ip=spec.resolver_ip,
        src_port=53,
        dst_port=port,
        qname=qname,
        flags=_RESPONSE_FLAGS,
        answers=forged,
        fragment=FragmentInfo(0, False, 0),
    ).with_len()
    events = []
    n = spec.attack_count
    for i in range(n):
        ts = start_us + (i * window_us) // max(n, 1)
        p = replace(template, timestamp=ts / US, txid=guesses[i], fragment=FragmentInfo(0, False, rng.getrandbits(16)))
        events.append((ts, i, p, ATTACK))
    authentic_ts = start_us + window_us + 1000
    authentic = replace(
        template,
        timestamp=authentic_ts / US,
        txid=real_txid,
        answers=(ResourceRecord.a(qname, "192.0.2.10", 3600),),
        fragment=FragmentInfo(0, False, rng.getrandbits(16)),
    ).with_len()
    events.append((authentic_ts, n, authentic, AUTHENTIC))
    if spec.kind is ScenarioKind.INTERLEAVED:
        noise = _noise_events(spec, rng, 0, repeats=False)
        events.extend((t, n + 1 + o, p, lbl) for t, o, p, lbl in noise)
    return _merge(events, n)


def _fragment_pair(
    p: DnsResponsePacket, mtu: int, ipid: int, ts_us: int
) -> tuple[DnsResponsePacket, DnsResponsePacket]:
    """Split ``p``'s UDP datagram into a first and one later IPv4 fragment."""
    udp = udp_datagram(p)
    cut = ((mtu - 20) // 8) * 8
    if len(udp) <= cut:
        raise ValueError(f"response of {len(udp)} bytes does not need fragmenting at MTU {mtu}")
    first = ipv4_packet(p.src_ip, p.dst_ip, udp[:cut], ipid, 0, True, p.ip_ttl)
    second = ipv4_packet(p.src_ip, p.dst_ip, udp[cut:], ipid, cut // 8, False, p.ip_ttl)
    return decode_response(first, ts_us / US), decode_response(second, ts_us / US)


def _large_response(spec: ScenarioSpec, rng: random.Random, qname: DomainName, address: str) -> DnsResponsePacket:
    zone = DomainName(qname.labels[-2:]) if len(qname) >= 2 else qname
    ns_hosts = [DomainName((f"ns{i}",) + zone.labels) for i in range(1, 9)]
    return DnsResponsePacket(
        timestamp=0.0,
        src_ip=spec.auth_ip,
        dst_ip=spec.resolver_ip,
        src_port=53,
        dst_port=rng.randint(1024, 65535),
        txid=rng.getrandbits(16),
        qname=qname,
        flags=_RESPONSE_FLAGS,
        answers=(ResourceRecord.a(qname, address, 3600),),
        authority=tuple(ResourceRecord.ns(zone, h) for h in ns_hosts),
        additional=tuple(ResourceRecord.a(qname, f"192.0.2.{i}", 3600) for i in range(1, 25)),
    )


def gen_frag_attack(spec: ScenarioSpec) -> LabeledStream:
    """Forged later fragments planted ahead of a legitimately fragmented reply.

    Forged fragments reuse the legitimate fragment's offset and length but
    rewrite the tail records to point at the attacker, and guess IPIDs.
    With ``attack_count=0`` the legitimate fragments are plain benign traffic.
    """
    rng = random.Random(f"frag:{spec.seed}")
    qname = name(spec.attack_domain)
    legit = _large_response(spec, rng, qname, "192.0.2.10")
    real_ipid = rng.getrandbits(16)
    n = spec.attack_count
    forge_us = 1000
    legit_us = forge_us + round(spec.attack_window_ms * 1000)
    poisoned = replace(
        legit,
        additional=tuple(replace(rr, rdata=bytes(int(x) for x in spec.attacker_ip.split("."))) for rr in legit.additional),
    )
    _, forged_template = _fragment_pair(poisoned, spec.frag_mtu, 0, forge_us)
    events = []
    ipids = rng.sample(range(65536), n)
    for i in range(n):
        ts = forge_us + (i * (legit_us - forge_us)) // max(n, 1)
        frag = replace(forged_template.fragment, ipid=ipids[i])
        events.append((ts, i, replace(forged_template, timestamp=ts / US, fragment=frag), ATTACK))
    first, second = _fragment_pair(legit, spec.frag_mtu, real_ipid, legit_us)
    label = AUTHENTIC if n else BENIGN
    events.append((legit_us, n, first, label))
    events.append((legit_us + 50, n + 1, replace(second, timestamp=(legit_us + 50) / US), label))
    return _merge(events, n)


def gen_oob_attack(spec: ScenarioSpec) -> LabeledStream:
    """Benign background plus one response smuggling an out-of-bailiwick record.

    ``oob_variant="additional"`` appends an A record for ``oob_target`` to the
    additional section; ``"tld"`` places an NS record for the target's TLD in
    the authority section.
    """
    rng = random.Random(f"oob:{spec.seed}")
    qname = name(spec.attack_domain)
    target = name(spec.oob_target)
    noise = _noise_events(spec, rng, 0, repeats=True)
    answers = (ResourceRecord.a(qname, "192.0.2.10", 3600),)
    if spec.oob_variant == "additional":
        authority: tuple[ResourceRecord, ...] = ()
        additional = (ResourceRecord.a(target, spec.attacker_ip, 86400),)
    else:
        tld = DomainName(target.labels[-1:])
        authority = (ResourceRecord.ns(tld, f"ns.{spec.oob_target}", 172800),)
        additional = ()
    span_us = max(1, round(spec.noise_count / spec.noise_rate * US))
    ts = span_us // 2
    attack = DnsResponsePacket(
        timestamp=ts / US,
        src_ip=spec.auth_ip,
        dst_ip=spec.resolver_ip,
        src_port=53,
        dst_port=rng.randint(1024, 65535),
        txid=rng.getrandbits(16),
        qname=qname,
        flags=_RESPONSE_FLAGS,
        answers=answers,
        authority=authority,
        additional=additional,
        fragment=FragmentInfo(0, False, rng.getrandbits(16)),
    ).with_len()
    noise.append((ts, len(noise), attack, ATTACK))
    return _merge(noise, 1)


def gen_benign(spec: ScenarioSpec) -> LabeledStream:
    """Benign-only traffic: one or two responses per qname, mixed section shapes."""
    rng = random.Random(f"benign:{spec.seed}")
    return _merge(_noise_events(spec, rng, 0, repeats=True), 0)


_GENERATORS = {
    ScenarioKind.S_ATTACK: gen_s_attack,
    ScenarioKind.INTERLEAVED: gen_s_attack,
    ScenarioKind.FRAG_ATTACK: gen_frag_attack,
    ScenarioKind.OOB_ATTACK: gen_oob_attack,
    ScenarioKind.BENIGN_ONLY: gen_benign,
}


def generate(spec: ScenarioSpec) -> LabeledStream:
    return _GENERATORS[spec.kind](spec)


def shape_of(p: DnsResponsePacket) -> str:
    """Classify a response into one of :data:`SHAPES` (``"other"`` otherwise)."""
    a, n, x = bool(p.answers), bool(p.authority), bool(p.additional)
    if a and n and x:
        return "all"
    if a and n:
        return "answer_authority"
    if a and not x:
        return "answer"
    if not a and (n or x):
        return "no_answer"
    return "other"


def labels_csv(labels: Sequence[str]) -> str:
    return "packet_index,label\n" + "".join(f"{i},{lbl}\n" for i, lbl in enumerate(labels))


def read_labels(path: str | Path) -> list[str]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "packet_index,label":
        raise ValueError(f"{path}: missing 'packet_index,label' header")
    out = []
    for i, line in enumerate(lines[1:]):
        idx, label = line.split(",")
        if int(idx) != i:
            raise ValueError(f"{path}: packet_index {idx} out of sequence at row {i}")
        out.append(label.strip())
    return out
