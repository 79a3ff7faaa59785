"""Typed DNS response model and RFC 1035 wire codec.

Packets carry the IP/UDP metadata the detection rules need (addresses,
ports, IPv4 fragmentation fields) alongside the decoded DNS message.
Decoding accepts name-compression pointers; encoding never emits them.
"""

from __future__ import annotations

import enum
import ipaddress
import struct
from dataclasses import dataclass, field, replace
from functools import lru_cache

TYPE_A = 1
TYPE_NS = 2
TYPE_CNAME = 5
TYPE_SOA = 6
TYPE_PTR = 12
TYPE_MX = 15
TYPE_AAAA = 28
TYPE_OPT = 41

CLASS_IN = 1

FLAG_QR = 0x8000
FLAG_AA = 0x0400
FLAG_TC = 0x0200
FLAG_RD = 0x0100
FLAG_RA = 0x0080

# ground-truth labels; AUTHENTIC is the legitimate reply racing an attack
ATTACK = "attack"
BENIGN = "benign"
AUTHENTIC = "authentic"
LABELS = (ATTACK, BENIGN, AUTHENTIC)

IPPROTO_UDP = 17
DNS_PORT = 53

_MAX_NAME_LEN = 253
_MAX_LABEL_LEN = 63
_HEADER = struct.Struct("!HHHHHH")
_RR_FIXED = struct.Struct("!HHIH")
_IPV4 = struct.Struct("!BBHHHBBH4s4s")
_UDP = struct.Struct("!HHHH")


class MalformedPacket(ValueError):
    """Raised when bytes cannot be decoded as an IP/UDP/DNS datagram."""


class NotAResponse(ValueError):
    """Raised when a well-formed DNS message has QR=0."""


@dataclass(frozen=True, order=True)
class DomainName:
    """A domain name as a tuple of lowercase labels, root omitted.

    The empty tuple is the root name (used by OPT pseudo-records).
    """

    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        labels = tuple(label.lower() for label in self.labels)
        for label in labels:
            if not 1 <= len(label) <= _MAX_LABEL_LEN:
                raise ValueError(f"label length out of range: {label!r}")
            if not label.isascii():
                raise ValueError(f"non-ASCII label: {label!r}")
        if len(".".join(labels)) > _MAX_NAME_LEN:
            raise ValueError("domain name longer than 253 bytes")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def parse(cls, text: str) -> DomainName:
        text = text.strip()
        if text in ("", "."):
            return cls(())
        return cls(tuple(text.rstrip(".").split(".")))

    def __str__(self) -> str:
        text = self.__dict__.get("_text")
        if text is None:
            text = ".".join(self.labels) if self.labels else "."
            self.__dict__["_text"] = text
        return text

    def __len__(self) -> int:
        return len(self.labels)

    def ends_with(self, origin: DomainName) -> bool:
        n = len(origin.labels)
        if n == 0:
            return True
        return len(self.labels) >= n and self.labels[-n:] == origin.labels

    def to_wire(self) -> bytes:
        return _name_to_wire(self.labels)


def name(text: str | DomainName) -> DomainName:
    """Coerce a string (or name) to a :class:`DomainName`."""
    if isinstance(text, DomainName):
        return text
    return DomainName.parse(text)


@lru_cache(maxsize=65536)
def _name_to_wire(labels: tuple[str, ...]) -> bytes:
    out = bytearray()
    for label in labels:
        raw = label.encode("ascii")
        out.append(len(raw))
        out += raw
    out.append(0)
    return bytes(out)


def is_within_bailiwick(domain: DomainName, origin: DomainName) -> bool:
    """True iff ``origin`` is a whole-label suffix of ``domain`` (or equal)."""
    return domain.ends_with(origin)


@dataclass(frozen=True)
class ResourceRecord:
    name: DomainName
    rtype: int
    ttl: int
    rdata: bytes
    rclass: int = CLASS_IN

    def __post_init__(self) -> None:
        if not 0 <= self.ttl <= 0xFFFFFFFF:
            raise ValueError(f"ttl out of u32 range: {self.ttl}")

    @classmethod
    def a(cls, owner: str | DomainName, address: str, ttl: int = 300) -> ResourceRecord:
        return cls(name(owner), TYPE_A, ttl, ipaddress.IPv4Address(address).packed)

    @classmethod
    def aaaa(cls, owner: str | DomainName, address: str, ttl: int = 300) -> ResourceRecord:
        return cls(name(owner), TYPE_AAAA, ttl, ipaddress.IPv6Address(address).packed)

    @classmethod
    def ns(cls, owner: str | DomainName, target: str | DomainName, ttl: int = 86400) -> ResourceRecord:
        return cls(name(owner), TYPE_NS, ttl, name(target).to_wire())

    @property
    def address(self) -> str:
        if self.rtype == TYPE_A and len(self.rdata) == 4:
            return str(ipaddress.IPv4Address(self.rdata))
        if self.rtype == TYPE_AAAA and len(self.rdata) == 16:
            return str(ipaddress.IPv6Address(self.rdata))
        raise ValueError(f"record type {self.rtype} with {len(self.rdata)}-byte rdata has no address")

    @property
    def target(self) -> DomainName:
        if self.rtype not in (TYPE_NS, TYPE_CNAME, TYPE_PTR):
            raise ValueError(f"record type {self.rtype} has no target name")
        labels, _ = _read_name(self.rdata, 0)
        return DomainName(labels)


@dataclass(frozen=True)
class FragmentInfo:
    """IPv4 fragmentation fields; ``offset`` is in 8-byte units."""

    offset: int = 0
    more_fragments: bool = False
    ipid: int = 0

    @property
    def is_first_fragment(self) -> bool:
        return self.offset == 0 and self.more_fragments

    @property
    def is_later_fragment(self) -> bool:
        return self.offset > 0

    @property
    def is_fragmented(self) -> bool:
        return self.more_fragments or self.offset > 0


@dataclass(frozen=True)
class DnsResponsePacket:
    """One DNS response as seen on the wire toward the resolver.

    ``qname`` is ``None`` only for non-first IPv4 fragments, which carry no
    DNS header. Fragments keep their IP payload verbatim in ``ip_payload`` so
    they re-encode byte-for-byte.
    """

    timestamp: float
    src_ip: str
    dst_ip: str
    src_port: int = DNS_PORT
    dst_port: int = 0
    txid: int = 0
    qname: DomainName | None = None
    qtype: int = TYPE_A
    flags: int = FLAG_QR
    answers: tuple[ResourceRecord, ...] = ()
    authority: tuple[ResourceRecord, ...] = ()
    additional: tuple[ResourceRecord, ...] = ()
    fragment: FragmentInfo | None = None
    qclass: int = CLASS_IN
    ip_ttl: int = 64
    ip_payload: bytes | None = None
    raw_len: int = field(default=0, compare=False)

    @property
    def tc_flag(self) -> bool:
        return bool(self.flags & FLAG_TC)

    @property
    def qr_flag(self) -> bool:
        return bool(self.flags & FLAG_QR)

    @property
    def is_ipv6(self) -> bool:
        return ":" in self.src_ip

    @property
    def has_sections(self) -> bool:
        """True when the DNS sections were fully decoded (no partial fragment)."""
        return self.qname is not None and (self.fragment is None or not self.fragment.is_fragmented)

    @property
    def record_count(self) -> int:
        return len(self.answers) + len(self.authority) + len(self.additional)

    @property
    def has_edns(self) -> bool:
        return any(rr.rtype == TYPE_OPT for rr in self.additional)

    def with_len(self) -> DnsResponsePacket:
        return replace(self, raw_len=len(encode_response(self)))


class Action(str, enum.Enum):
    FORWARD = "forward"
    TRUNCATE = "truncate"
    DROP = "drop"


class Rule(str, enum.Enum):
    R1 = "R1"
    R2 = "R2"
    R3 = "R3"


@dataclass(frozen=True)
class Verdict:
    action: Action
    fired_rule: Rule | None
    packet_index: int

    def __post_init__(self) -> None:
        if self.action is Action.TRUNCATE and self.fired_rule is None:
            raise ValueError("a truncate verdict needs the rule that fired")


# ---------------------------------------------------------------- decoding


def _read_name(buf: bytes, offset: int) -> tuple[tuple[str, ...], int]:
    """Read a possibly-compressed name; return (labels, offset after name)."""
    labels: list[str] = []
    end = None
    seen: set[int] = set()
    total = 0
    while True:
        if offset >= len(buf):
            raise MalformedPacket("name runs past end of message")
        length = buf[offset]
        kind = length & 0xC0
        if kind == 0xC0:
            if offset + 1 >= len(buf):
                raise MalformedPacket("truncated compression pointer")
            target = ((length & 0x3F) << 8) | buf[offset + 1]
            if end is None:
                end = offset + 2
            if target in seen or target >= offset:
                raise MalformedPacket("compression pointer loop")
            seen.add(target)
            offset = target
            continue
        if kind:
            raise MalformedPacket(f"unsupported label type 0x{kind:02x}")
        if length == 0:
            offset += 1
            break
        raw = buf[offset + 1 : offset + 1 + length]
        if len(raw) != length:
            raise MalformedPacket("label runs past end of message")
        total += length + 1
        if total > _MAX_NAME_LEN + 1:
            raise MalformedPacket("name longer than 253 bytes")
        try:
            labels.append(raw.decode("ascii").lower())
        except UnicodeDecodeError:
            raise MalformedPacket("non-ASCII label") from None
        offset += 1 + length
    return tuple(labels), (end if end is not None else offset)


def _read_rdata(buf: bytes, offset: int, rtype: int, rdlen: int) -> bytes:
    end = offset + rdlen
    if end > len(buf):
        raise MalformedPacket("rdata runs past end of message")
    # name-bearing rdata is stored decompressed so it survives re-encoding
    if rtype in (TYPE_NS, TYPE_CNAME, TYPE_PTR):
        labels, _ = _read_name(buf, offset)
        return _name_to_wire(labels)
    if rtype == TYPE_MX:
        labels, _ = _read_name(buf, offset + 2)
        return buf[offset : offset + 2] + _name_to_wire(labels)
    if rtype == TYPE_SOA:
        mname, pos = _read_name(buf, offset)
        rname, pos = _read_name(buf, pos)
        return _name_to_wire(mname) + _name_to_wire(rname) + buf[pos : pos + 20]
    return buf[offset:end]


def _read_records(buf: bytes, offset: int, count: int) -> tuple[list[ResourceRecord], int]:
    records = []
    for _ in range(count):
        labels, offset = _read_name(buf, offset)
        if offset + _RR_FIXED.size > len(buf):
            raise MalformedPacket("truncated resource record")
        rtype, rclass, ttl, rdlen = _RR_FIXED.unpack_from(buf, offset)
        offset += _RR_FIXED.size
        rdata = _read_rdata(buf, offset, rtype, rdlen)
        offset += rdlen
        records.append(ResourceRecord(DomainName(labels), rtype, ttl, rdata, rclass))
    return records, offset


def _decode_dns(buf: bytes, partial: bool) -> dict:
    if len(buf) < _HEADER.size:
        raise MalformedPacket("DNS header truncated")
    txid, flags, qdcount, ancount, nscount, arcount = _HEADER.unpack_from(buf)
    if not flags & FLAG_QR:
        raise NotAResponse(f"QR bit clear (txid=0x{txid:04x})")
    if qdcount != 1:
        raise MalformedPacket(f"expected one question, got {qdcount}")
    labels, offset = _read_name(buf, _HEADER.size)
    if offset + 4 > len(buf):
        raise MalformedPacket("question truncated")
    qtype, qclass = struct.unpack_from("!HH", buf, offset)
    offset += 4
    sections: list[list[ResourceRecord]] = []
    cut = False
    for count in (ancount, nscount, arcount):
        if cut:
            sections.append([])
            continue
        if partial:
            # a first fragment holds only a prefix of the message; every
            # section from the first incomplete one onward is left empty
            try:
                records, offset = _read_records(buf, offset, count)
            except MalformedPacket:
                cut = True
                sections.append([])
                continue
        else:
            records, offset = _read_records(buf, offset, count)
        sections.append(records)
    return {
        "txid": txid,
        "flags": flags,
        "qname": DomainName(labels),
        "qtype": qtype,
        "qclass": qclass,
        "answers": tuple(sections[0]),
        "authority": tuple(sections[1]),
        "additional": tuple(sections[2]),
    }


def decode_response(data: bytes, ts: float = 0.0) -> DnsResponsePacket:
    """Decode an IPv4 or IPv6 datagram carrying a DNS response over UDP."""
    if not data:
        raise MalformedPacket("empty datagram")
    version = data[0] >> 4
    if version == 4:
        return _decode_ipv4(data, ts)
    if version == 6:
        return _decode_ipv6(data, ts)
    raise MalformedPacket(f"unknown IP version {version}")


def _decode_ipv4(data: bytes, ts: float) -> DnsResponsePacket:
    if len(data) < _IPV4.size:
        raise MalformedPacket("IPv4 header truncated")
    (ver_ihl, _tos, total_len, ipid, frag, ttl, proto, _csum, src, dst) = _IPV4.unpack_from(data)
    ihl = (ver_ihl & 0x0F) * 4
    if ihl < 20 or total_len < ihl or total_len > len(data):
        raise MalformedPacket("bad IPv4 length fields")
    if proto != IPPROTO_UDP:
        raise MalformedPacket(f"not UDP (protocol {proto})")
    fragment = FragmentInfo(frag & 0x1FFF, bool(frag & 0x2000), ipid)
    payload = data[ihl:total_len]
    base = {
        "timestamp": ts,
        "src_ip": str(ipaddress.IPv4Address(src)),
        "dst_ip": str(ipaddress.IPv4Address(dst)),
        "fragment": fragment,
        "ip_ttl": ttl,
        "raw_len": total_len,
    }
    if fragment.offset > 0:
        return DnsResponsePacket(src_port=0, dst_port=0, qtype=0, flags=0, ip_payload=payload, **base)
    if len(payload) < _UDP.size:
        raise MalformedPacket("UDP header truncated")
    sport, dport, ulen, _ = _UDP.unpack_from(payload)
    if fragment.more_fragments:
        dns = _decode_dns(payload[_UDP.size :], partial=True)
        return DnsResponsePacket(src_port=sport, dst_port=dport, ip_payload=payload, **base, **dns)
    if ulen < _UDP.size or ulen > len(payload):
        raise MalformedPacket("bad UDP length")
    dns = _decode_dns(payload[_UDP.size : ulen], partial=False)
    return DnsResponsePacket(src_port=sport, dst_port=dport, **base, **dns)


def _decode_ipv6(data: bytes, ts: float) -> DnsResponsePacket:
    if len(data) < 40:
        raise MalformedPacket("IPv6 header truncated")
    plen, nxt, hops = struct.unpack_from("!HBB", data, 4)
    if nxt != IPPROTO_UDP:
        raise MalformedPacket(f"IPv6 next header {nxt} is not UDP")
    if 40 + plen > len(data):
        raise MalformedPacket("IPv6 payload truncated")
    payload = data[40 : 40 + plen]
    if len(payload) < _UDP.size:
        raise MalformedPacket("UDP header truncated")
    sport, dport, ulen, _ = _UDP.unpack_from(payload)
    if ulen < _UDP.size or ulen > len(payload):
        raise MalformedPacket("bad UDP length")
    dns = _decode_dns(payload[_UDP.size : ulen], partial=False)
    return DnsResponsePacket(
        timestamp=ts,
        src_ip=str(ipaddress.IPv6Address(data[8:24])),
        dst_ip=str(ipaddress.IPv6Address(data[24:40])),
        src_port=sport,
        dst_port=dport,
        ip_ttl=hops,
        raw_len=40 + plen,
        **dns,
    )


# ---------------------------------------------------------------- encoding


def _encode_record(rr: ResourceRecord) -> bytes:
    return rr.name.to_wire() + _RR_FIXED.pack(rr.rtype, rr.rclass, rr.ttl, len(rr.rdata)) + rr.rdata


def encode_dns(p: DnsResponsePacket) -> bytes:
    """Encode only the DNS message (no IP/UDP headers)."""
    if p.qname is None:
        raise ValueError("packet has no DNS header to encode")
    parts = [
        _HEADER.pack(p.txid, p.flags, 1, len(p.answers), len(p.authority), len(p.additional)),
        p.qname.to_wire(),
        struct.pack("!HH", p.qtype, p.qclass),
    ]
    for section in (p.answers, p.authority, p.additional):
        parts.extend(_encode_record(rr) for rr in section)
    return b"".join(parts)


def internet_checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


@lru_cache(maxsize=4096)
def _packed(addr: str) -> bytes:
    return ipaddress.ip_address(addr).packed


def udp_datagram(p: DnsResponsePacket) -> bytes:
    """UDP header plus DNS message, with the checksum over the pseudo-header."""
    dns = encode_dns(p)
    length = _UDP.size + len(dns)
    src, dst = _packed(p.src_ip), _packed(p.dst_ip)
    if len(src) == 4:
        pseudo = src + dst + struct.pack("!BBH", 0, IPPROTO_UDP, length)
    else:
        pseudo = src + dst + struct.pack("!I3xB", length, IPPROTO_UDP)
    header = _UDP.pack(p.src_port, p.dst_port, length, 0)
    csum = internet_checksum(pseudo + header + dns) or 0xFFFF
    return _UDP.pack(p.src_port, p.dst_port, length, csum) + dns


def ipv4_packet(src: str, dst: str, payload: bytes, ipid: int, offset: int, more: bool, ttl: int = 64) -> bytes:
    frag = (0x2000 if more else 0) | (offset & 0x1FFF)
    header = _IPV4.pack(0x45, 0, 20 + len(payload), ipid, frag, ttl, IPPROTO_UDP, 0, _packed(src), _packed(dst))
    csum = internet_checksum(header)
    return header[:10] + struct.pack("!H", csum) + header[12:] + payload


def encode_response(p: DnsResponsePacket) -> bytes:
    """Encode a packet as an IP datagram (IPv4 or IPv6)."""
    frag = p.fragment or FragmentInfo()
    if p.ip_payload is not None:
        return ipv4_packet(p.src_ip, p.dst_ip, p.ip_payload, frag.ipid, frag.offset, frag.more_fragments, p.ip_ttl)
    udp = udp_datagram(p)
    if p.is_ipv6:
        header = struct.pack("!IHBB", 6 << 28, len(udp), IPPROTO_UDP, p.ip_ttl)
        return header + _packed(p.src_ip) + _packed(p.dst_ip) + udp
    return ipv4_packet(p.src_ip, p.dst_ip, udp, frag.ipid, frag.offset, frag.more_fragments, p.ip_ttl)
