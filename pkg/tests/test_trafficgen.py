import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnscpm.engine import EngineConfig, process
from dnscpm.model import ATTACK, AUTHENTIC, BENIGN, Action, Rule, encode_response, name
from dnscpm.rules import rule3
from dnscpm.trafficgen import (
    SHAPE_WEIGHTS,
    SHAPES,
    MissingDomainList,
    ScenarioKind,
    ScenarioSpec,
    generate,
    labels_csv,
    load_domain_list,
    read_labels,
    shape_of,
    synthetic_domains,
)


def test_default_s_attack_sizes(interleaved):
    assert interleaved.count(ATTACK) == 65535
    assert interleaved.count(AUTHENTIC) == 1
    assert interleaved.count(BENIGN) == 1000
    assert interleaved.intended_total == 65535


def test_attack_spread_over_window(s_attack):
    ts = [p.timestamp for p, lbl in zip(s_attack, s_attack.labels) if lbl == ATTACK]
    assert ts[0] >= 0.001 and ts[-1] < 0.401


def test_txids_distinct_and_exclude_real():
    stream = generate(ScenarioSpec(kind=ScenarioKind.S_ATTACK, seed=9, attack_count=10))
    attack = [p.txid for p, lbl in zip(stream, stream.labels) if lbl == ATTACK]
    real = [p.txid for p, lbl in zip(stream, stream.labels) if lbl == AUTHENTIC]
    assert len(set(attack)) == 10
    assert real[0] not in attack


def test_spoofed_responses_copy_addressing(s_attack):
    authentic = s_attack.packets[s_attack.labels.index(AUTHENTIC)]
    for p in s_attack.packets[:50]:
        assert (p.src_ip, p.src_port, p.dst_port, p.qname) == (
            authentic.src_ip,
            authentic.src_port,
            authentic.dst_port,
            authentic.qname,
        )


def test_interleaved_noise_has_distinct_qnames(interleaved):
    noise = [p.qname for p, lbl in zip(interleaved, interleaved.labels) if lbl == BENIGN]
    assert len(set(noise)) == len(noise)


@pytest.mark.parametrize("kind", list(ScenarioKind))
def test_same_seed_same_bytes(kind):
    spec = ScenarioSpec(kind=kind, seed=17, attack_count=300, noise_count=300)
    a, b = generate(spec), generate(spec)
    assert [encode_response(p) for p in a] == [encode_response(p) for p in b]
    assert a.labels == b.labels


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(list(ScenarioKind)))
def test_sorted_and_labelled(seed, kind):
    stream = generate(ScenarioSpec(kind=kind, seed=seed, attack_count=50, noise_count=50))
    ts = [p.timestamp for p in stream]
    assert ts == sorted(ts)
    assert len(stream.labels) == len(stream.packets)
    assert set(stream.labels) <= {ATTACK, BENIGN, AUTHENTIC}
    # whole microseconds only, so pcap storage is lossless
    assert all(round(t * 1e6) / 1e6 == t for t in ts)


def test_benign_shape_mix(benign):
    counts = {s: 0 for s in SHAPES}
    for p in benign:
        counts[shape_of(p)] += 1
    for shape, weight in zip(SHAPES, SHAPE_WEIGHTS):
        assert abs(counts[shape] / len(benign) - weight) <= 0.02, shape


def test_benign_one_or_two_per_name(benign):
    seen: dict = {}
    for p in benign:
        seen[p.qname] = seen.get(p.qname, 0) + 1
    assert set(seen.values()) <= {1, 2}
    assert any(c == 2 for c in seen.values())


def test_benign_is_in_bailiwick(benign):
    assert not any(rule3(p) for p in benign)


def test_empty_benign():
    assert len(generate(ScenarioSpec(kind=ScenarioKind.BENIGN_ONLY, noise_count=0))) == 0


def test_missing_domain_list():
    with pytest.raises(MissingDomainList):
        generate(ScenarioSpec(kind=ScenarioKind.BENIGN_ONLY, noise_domains=(), noise_count=5))


def test_explicit_domain_list_used():
    domains = ("alpha.com", "beta.net", "gamma.org")
    stream = generate(ScenarioSpec(kind=ScenarioKind.BENIGN_ONLY, noise_domains=domains, noise_count=6))
    bases = {str(p.qname).removeprefix("www.") for p in stream}
    assert bases <= set(domains)


@pytest.mark.parametrize("bad", [dict(attack_count=65536), dict(attack_count=-1), dict(noise_count=-1), dict(oob_variant="x")])
def test_spec_validation(bad):
    with pytest.raises(ValueError):
        ScenarioSpec(**bad)


def test_frag_default_dropped_and_truncated():
    stream = generate(ScenarioSpec(kind=ScenarioKind.FRAG_ATTACK, seed=1, attack_count=200))
    verdicts, m = process(EngineConfig(), stream.packets, stream.labels)
    for p, v in zip(stream, verdicts):
        if p.fragment.offset > 0:
            assert v.action is Action.DROP
        else:
            assert p.fragment.more_fragments
            assert (v.action, v.fired_rule) == (Action.TRUNCATE, Rule.R2)
    assert m.attack_forwarded == 0


def test_single_forged_fragment():
    stream = generate(ScenarioSpec(kind=ScenarioKind.FRAG_ATTACK, seed=2, attack_count=1))
    verdicts, _ = process(EngineConfig(), stream.packets, stream.labels)
    assert verdicts[stream.labels.index(ATTACK)].action is Action.DROP


def test_zero_forged_fragments_cost_a_false_positive():
    stream = generate(ScenarioSpec(kind=ScenarioKind.FRAG_ATTACK, seed=2, attack_count=0))
    assert stream.labels == [BENIGN, BENIGN]
    verdicts, m = process(EngineConfig(), stream.packets, stream.labels)
    assert [v.action for v in verdicts] == [Action.TRUNCATE, Action.DROP]
    assert m.fp_rate == 1.0


@pytest.mark.parametrize("variant", ["additional", "tld"])
def test_oob_flagged_by_bailiwick(variant):
    spec = ScenarioSpec(kind=ScenarioKind.OOB_ATTACK, seed=4, attack_domain="example.net", oob_variant=variant)
    stream = generate(spec)
    i = stream.labels.index(ATTACK)
    p = stream.packets[i]
    assert p.qname == name("example.net")
    assert rule3(p)
    verdicts, m = process(EngineConfig(), stream.packets, stream.labels)
    assert (verdicts[i].action, verdicts[i].fired_rule) == (Action.TRUNCATE, Rule.R3)
    assert m.first_flag_index == i


def test_synthetic_domains_distinct():
    ds = synthetic_domains(5000, seed=1)
    assert len(set(ds)) == 5000
    assert synthetic_domains(50, seed=1) == ds[:50]


def test_domain_list_formats(tmp_path):
    plain = tmp_path / "plain.txt"
    plain.write_text("# top\nexample.com\n\nexample.org.\n")
    ranked = tmp_path / "tranco.csv"
    ranked.write_text("1,google.com\n2,facebook.com\n")
    assert load_domain_list(plain) == ["example.com", "example.org"]
    assert load_domain_list(ranked) == ["google.com", "facebook.com"]


def test_labels_roundtrip(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text(labels_csv([ATTACK, BENIGN, AUTHENTIC]))
    assert read_labels(path) == [ATTACK, BENIGN, AUTHENTIC]
    path.write_text("packet_index,label\n1,attack\n")
    with pytest.raises(ValueError):
        read_labels(path)
