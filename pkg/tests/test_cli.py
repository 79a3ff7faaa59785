import csv
import io
import json

import pytest

from dnscpm import cli
from dnscpm.pcapio import read_capture


def _run(*argv):
    return cli.main([str(a) for a in argv])


def test_costmodel_stdout(capsys):
    assert _run("costmodel") == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 12
    ws = [r for r in rows if r["method"] == "WS"]
    assert float(ws[-1]["inference"]) == 100


def test_costmodel_file(tmp_path):
    out = tmp_path / "cost.csv"
    assert _run("costmodel", "--out", out) == 0
    assert out.read_text().startswith("method,N,memory,error,inference,memory_unit\n")


def test_generate_and_analyze_s(tmp_path):
    pcap, labels = tmp_path / "s.pcap", tmp_path / "s.csv"
    assert _run("generate", "--scenario", "s", "--seed", 1, "--out", pcap, "--labels", labels) == 0
    verdicts, metrics = tmp_path / "v.csv", tmp_path / "m.json"
    code = _run(
        "analyze", "--pcap", pcap, "--resolver", "10.0.0.53", "--labels", labels,
        "--out-verdicts", verdicts, "--out-metrics", metrics,
    )
    assert code == 0
    m = json.loads(metrics.read_text())
    assert m["asr"] == pytest.approx(7.63e-5, rel=1e-3)
    assert m["attack_forwarded"] == 5
    assert len(verdicts.read_text().splitlines()) == 65537


def test_benign_fp_zero_at_w500(tmp_path):
    pcap, labels = tmp_path / "b.pcap", tmp_path / "b.csv"
    assert _run("generate", "--scenario", "benign", "--seed", 2, "--out", pcap, "--labels", labels) == 0
    metrics = tmp_path / "m.json"
    code = _run(
        "analyze", "--pcap", pcap, "--resolver", "10.0.0.53", "--labels", labels, "--cms-w", 500,
        "--out-verdicts", tmp_path / "v.csv", "--out-metrics", metrics,
    )
    assert code == 0
    m = json.loads(metrics.read_text())
    assert m["benign_total"] == 10_000 and m["fp_rate"] == 0


def test_generate_is_reproducible(tmp_path):
    outs = []
    for i in range(2):
        pcap = tmp_path / f"{i}.pcap"
        _run("generate", "--scenario", "interleaved", "--seed", 3, "--out", pcap, "--labels", tmp_path / f"{i}.csv")
        outs.append(pcap.read_bytes())
    assert outs[0] == outs[1]


def test_frag_generate_has_later_fragment(tmp_path):
    pcap = tmp_path / "f.pcap"
    assert _run("generate", "--scenario", "frag", "--seed", 0, "--out", pcap, "--labels", tmp_path / "f.csv") == 0
    assert any(p.fragment.offset > 0 for p in read_capture(pcap))


def test_emit_pcap_and_csv_metrics(tmp_path):
    pcap = tmp_path / "o.pcap"
    _run("generate", "--scenario", "oob", "--seed", 0, "--out", pcap, "--labels", tmp_path / "o.csv")
    emitted, metrics = tmp_path / "e.pcap", tmp_path / "m.csv"
    code = _run(
        "analyze", "--pcap", pcap, "--emit-pcap", emitted, "--out-metrics", metrics,
        "--out-verdicts", tmp_path / "v.csv",
    )
    assert code == 0
    row = next(csv.DictReader(io.StringIO(metrics.read_text())))
    out = read_capture(emitted)
    assert len(out) == int(row["forwarded"]) + int(row["truncated"])
    assert sum(p.tc_flag for p in out) == int(row["truncated"])
    assert int(row["rule_R3"]) == 1


def test_missing_pcap_leaves_no_outputs(tmp_path):
    verdicts, metrics = tmp_path / "v.csv", tmp_path / "m.json"
    code = _run("analyze", "--pcap", tmp_path / "nope.pcap", "--out-verdicts", verdicts, "--out-metrics", metrics)
    assert code == 2
    assert list(tmp_path.iterdir()) == []


def test_bad_capture_exit_code(tmp_path):
    bad = tmp_path / "bad.pcap"
    bad.write_bytes(b"not a capture at all, sorry")
    assert _run("analyze", "--pcap", bad, "--out-verdicts", tmp_path / "v", "--out-metrics", tmp_path / "m") == 2
    assert sorted(p.name for p in tmp_path.iterdir()) == ["bad.pcap"]


def test_label_count_mismatch(tmp_path):
    pcap, labels = tmp_path / "o.pcap", tmp_path / "o.csv"
    _run("generate", "--scenario", "oob", "--noise-count", 10, "--out", pcap, "--labels", labels)
    labels.write_text("packet_index,label\n0,benign\n")
    assert _run("analyze", "--pcap", pcap, "--labels", labels, "--out-verdicts", tmp_path / "v.csv") == 2


def test_usage_errors():
    assert _run() == 2
    assert _run("analyze") == 2
    assert _run("sweep", "--out", "x.csv", "--d-grid", "2,zero") == 2
    assert _run("generate", "--scenario", "nosuch", "--out", "x", "--labels", "y") == 2


def test_help_exits_zero(capsys):
    assert _run("--help") == 0
    assert "analyze" in capsys.readouterr().out


def test_sweep_default_grid(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = _run("sweep", "--attack-count", 500, "--noise-count", 200, "--out", out)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 12
    assert {r["asr"] for r in rows} == {repr(5 / 500)}


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.conf"
    cfg.write_text(f"# sweep settings\nd-grid = 2,3\nw_grid = 100\nout = {tmp_path / 'from_cfg.csv'}\nattack-count = 100\nnoise_count = 50\n")
    assert _run("--config", cfg, "sweep") == 0
    rows = list(csv.DictReader(io.StringIO((tmp_path / "from_cfg.csv").read_text())))
    assert [(r["d"], r["w"]) for r in rows] == [("2", "100"), ("3", "100")]
    assert _run("--config", cfg, "sweep", "--w-grid", "100,500", "--out", tmp_path / "flag.csv") == 0
    assert len((tmp_path / "flag.csv").read_text().splitlines()) == 5


def test_config_file_bad_line(tmp_path):
    cfg = tmp_path / "bad.conf"
    cfg.write_text("this line has no equals sign\n")
    assert _run("--config", cfg, "costmodel") == 2


def test_seed_from_environment(tmp_path, monkeypatch):
    outs = []
    for seed in ("11", "11", "12"):
        monkeypatch.setenv("DNS_CPM_SEED", seed)
        pcap = tmp_path / f"{len(outs)}.pcap"
        _run("generate", "--scenario", "benign", "--noise-count", 50, "--out", pcap, "--labels", tmp_path / "l.csv")
        outs.append(pcap.read_bytes())
    assert outs[0] == outs[1] != outs[2]
    monkeypatch.setenv("DNS_CPM_SEED", "eleven")
    assert _run("generate", "--scenario", "benign", "--out", tmp_path / "z.pcap", "--labels", tmp_path / "z.csv") == 2
