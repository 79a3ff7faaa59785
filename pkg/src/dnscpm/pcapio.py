"""Classic libpcap capture reading and writing.

Reading keeps only DNS responses (UDP source port 53, QR=1) addressed to the
resolver, plus IPv4 fragments toward it. Fragments are passed through as-is;
nothing is reassembled.
"""

from __future__ import annotations

import ipaddress
import logging
import struct
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from pathlib import Path

from .model import (
    DNS_PORT,
    IPPROTO_UDP,
    DnsResponsePacket,
    MalformedPacket,
    NotAResponse,
    decode_response,
    encode_response,
)

log = logging.getLogger(__name__)

MAGIC_USEC = 0xA1B2C3D4
MAGIC_NSEC = 0xA1B23C4D
LINKTYPE_NULL = 0
LINKTYPE_ETHERNET = 1
LINKTYPE_RAW = 101
LINKTYPE_LINUX_SLL = 113

_ETH_HEADER = bytes.fromhex("020000000001" "020000000002")
_ETHERTYPE_IPV4 = 0x0800
_ETHERTYPE_IPV6 = 0x86DD
_ETHERTYPE_VLAN = 0x8100


class BadCaptureHeader(ValueError):
    pass


class UnsupportedLinkType(ValueError):
    pass


@dataclass
class ReadStats:
    records: int = 0
    yielded: int = 0
    malformed: int = 0
    queries: int = 0
    filtered: int = 0
    fragments: int = 0
    fragments_matched: int = 0


def _strip_link(frame: bytes, linktype: int) -> bytes | None:
    if linktype == LINKTYPE_RAW:
        return frame
    if linktype == LINKTYPE_ETHERNET:
        if len(frame) < 14:
            return None
        ethertype = struct.unpack_from("!H", frame, 12)[0]
        offset = 14
        while ethertype == _ETHERTYPE_VLAN and len(frame) >= offset + 4:
            ethertype = struct.unpack_from("!H", frame, offset + 2)[0]
            offset += 4
        if ethertype not in (_ETHERTYPE_IPV4, _ETHERTYPE_IPV6):
            return None
        return frame[offset:]
    if linktype == LINKTYPE_NULL:
        return frame[4:]
    if linktype == LINKTYPE_LINUX_SLL:
        if len(frame) < 16:
            return None
        if struct.unpack_from("!H", frame, 14)[0] not in (_ETHERTYPE_IPV4, _ETHERTYPE_IPV6):
            return None
        return frame[16:]
    raise UnsupportedLinkType(f"link type {linktype}")


def iter_records(path: str | Path) -> Iterator[tuple[float, bytes]]:
    """Yield ``(timestamp, ip_datagram)`` for every IP record in a capture."""
    with open(path, "rb") as fh:
        header = fh.read(24)
        if len(header) < 24:
            raise BadCaptureHeader(f"{path}: file shorter than a pcap global header")
        for endian in "<>":
            magic = struct.unpack(endian + "I", header[:4])[0]
            if magic in (MAGIC_USEC, MAGIC_NSEC):
                break
        else:
            raise BadCaptureHeader(f"{path}: bad magic 0x{header[:4].hex()}")
        major, _minor, _zone, _sigfigs, _snaplen, linktype = struct.unpack(endian + "HHiIII", header[4:])
        if major != 2:
            raise BadCaptureHeader(f"{path}: unsupported pcap version {major}")
        if linktype not in (LINKTYPE_NULL, LINKTYPE_ETHERNET, LINKTYPE_RAW, LINKTYPE_LINUX_SLL):
            raise UnsupportedLinkType(f"{path}: link type {linktype}")
        divisor = 1_000_000 if magic == MAGIC_USEC else 1_000_000_000
        rec = struct.Struct(endian + "IIII")
        while True:
            raw = fh.read(rec.size)
            if len(raw) < rec.size:
                return
            sec, frac, incl, _orig = rec.unpack(raw)
            frame = fh.read(incl)
            if len(frame) < incl:
                log.warning("%s: truncated final record", path)
                return
            ip = _strip_link(frame, linktype)
            yield (sec * divisor + frac) / divisor, ip if ip is not None else b""


def _peek(ip: bytes) -> tuple[str, int, int, int] | None:
    """Cheap pre-parse: (dst address, fragment offset, UDP source port, protocol)."""
    if not ip:
        return None
    version = ip[0] >> 4
    if version == 4 and len(ip) >= 20:
        ihl = (ip[0] & 0x0F) * 4
        offset = struct.unpack_from("!H", ip, 6)[0] & 0x1FFF
        sport = struct.unpack_from("!H", ip, ihl)[0] if offset == 0 and len(ip) >= ihl + 2 else -1
        return ".".join(str(b) for b in ip[16:20]), offset, sport, ip[9]
    if version == 6 and len(ip) >= 42:
        return str(ipaddress.IPv6Address(ip[24:40])), 0, struct.unpack_from("!H", ip, 40)[0], ip[6]
    return None


def read_capture(
    path: str | Path, resolver_ip: str | None = None, stats: ReadStats | None = None
) -> list[DnsResponsePacket]:
    """Load the resolver-bound DNS responses (and fragments) from a capture.

    ``resolver_ip=None`` keeps responses to any destination. Malformed
    candidates are skipped and counted in ``stats``.
    """
    stats = stats if stats is not None else ReadStats()
    if resolver_ip is not None:
        resolver_ip = str(ipaddress.ip_address(resolver_ip))
    first_fragments: set[tuple[str, str, int]] = set()
    out: list[DnsResponsePacket] = []
    for ts, ip in iter_records(path):
        stats.records += 1
        peek = _peek(ip)
        if peek is None:
            stats.filtered += 1
            continue
        dst, offset, sport, proto = peek
        if proto != IPPROTO_UDP or (resolver_ip is not None and dst != resolver_ip):
            stats.filtered += 1
            continue
        if offset == 0 and sport != DNS_PORT:
            stats.filtered += 1
            continue
        try:
            p = decode_response(ip, ts)
        except NotAResponse:
            stats.queries += 1
            continue
        except MalformedPacket as exc:
            stats.malformed += 1
            log.debug("skipping malformed record %d: %s", stats.records, exc)
            continue
        frag = p.fragment
        if frag is not None and frag.is_fragmented:
            stats.fragments += 1
            key = (p.src_ip, p.dst_ip, frag.ipid)
            if frag.offset == 0:
                first_fragments.add(key)
            elif key in first_fragments:
                stats.fragments_matched += 1
        out.append(p)
    out.sort(key=lambda p: p.timestamp)
    stats.yielded = len(out)
    return out


def write_capture(path: str | Path, stream: Iterable[DnsResponsePacket], snaplen: int = 65535) -> int:
    """Write packets as an Ethernet, microsecond, little-endian pcap; return the count."""
    count = 0
    rec = struct.Struct("<IIII")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<IHHiIII", MAGIC_USEC, 2, 4, 0, 0, snaplen, LINKTYPE_ETHERNET))
        for p in stream:
            ip = encode_response(p)
            ethertype = _ETHERTYPE_IPV6 if p.is_ipv6 else _ETHERTYPE_IPV4
            frame = _ETH_HEADER + struct.pack("!H", ethertype) + ip
            usec = round(p.timestamp * 1_000_000)
            fh.write(rec.pack(usec // 1_000_000, usec % 1_000_000, len(frame), len(frame)))
            fh.write(frame)
            count += 1
    return count
