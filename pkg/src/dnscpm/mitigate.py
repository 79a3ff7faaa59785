"""Truncation mitigation: set TC and strip every record section."""

from __future__ import annotations

from .model import FLAG_TC, DnsResponsePacket, FragmentInfo


class MissingQuestion(ValueError):
    """A flagged packet has no recoverable question section."""


def truncate(p: DnsResponsePacket) -> DnsResponsePacket:
    """Return ``p`` with TC=1 and empty answer/authority/additional sections.

    Addressing, ports, txid, qname, qtype and the remaining header flags are
    kept. A first fragment is rebuilt as a complete, unfragmented reply from
    its header and question.
    """
    if p.qname is None:
        raise MissingQuestion("packet carries no DNS question to truncate")
    frag = p.fragment
    if frag is not None and frag.is_fragmented:
        frag = FragmentInfo(0, False, frag.ipid)
    return DnsResponsePacket(
        timestamp=p.timestamp,
        src_ip=p.src_ip,
        dst_ip=p.dst_ip,
        src_port=p.src_port,
        dst_port=p.dst_port,
        txid=p.txid,
        qname=p.qname,
        qtype=p.qtype,
        flags=p.flags | FLAG_TC,
        fragment=frag,
        qclass=p.qclass,
        ip_ttl=p.ip_ttl,
        raw_len=(40 if p.is_ipv6 else 20) + 8 + 12 + len(p.qname.to_wire()) + 4,
    )
