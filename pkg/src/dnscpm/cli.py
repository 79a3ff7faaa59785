"""Command-line entry point: ``dns-cpm {analyze,generate,sweep,costmodel}``.

Every flag may also be given in a ``--config`` file of ``key = value`` lines
(keys use the flag's long name with dashes or underscores); command-line
flags win. ``DNS_CPM_SEED`` supplies the seed when neither sets one.

Exit codes: 0 success, 1 internal error, 2 bad input.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import costmodel, engine, pcapio, trafficgen
from .trafficgen import ScenarioKind, ScenarioSpec

log = logging.getLogger("dnscpm")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_BAD_INPUT = 2


class BadInput(Exception):
    pass


def _atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"grid values must be positive integers: {text!r}")
    return values


def load_config(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, quotes are stripped."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise BadInput(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value.strip("\"'")
    return out


def _default_seed() -> int:
    env = os.environ.get("DNS_CPM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise BadInput(f"DNS_CPM_SEED is not an integer: {env!r}") from None


def _engine_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("detector")
    g.add_argument("--tau", type=int, default=5, help="per-window response threshold (default 5)")
    g.add_argument("--interval", type=int, default=1, help="check interval N in packets (default 1)")
    g.add_argument("--window", type=float, default=1.0, help="tumbling window in seconds (default 1)")
    g.add_argument("--cms-d", type=int, default=5, help="CMS depth d (default 5)")
    g.add_argument("--cms-w", type=int, default=200, help="CMS width w (default 200)")
    g.add_argument("--seed", type=int, default=None, help="hash / scenario seed")


def _scenario_flags(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--scenario", choices=[k.value for k in ScenarioKind], required=required, default="interleaved")
    p.add_argument("--attack-count", type=int, default=65535)
    p.add_argument("--noise-count", type=int, default=None, help="benign packets (default 1000; 10000 for benign)")
    p.add_argument("--noise-rate", type=float, default=None, help="benign arrivals per second")
    p.add_argument("--domains", help="ranked domain list (one per line or rank,domain)")
    p.add_argument("--rate-ms", type=float, default=400.0, help="attack duration in ms (default 400)")
    p.add_argument("--attack-domain", default="victim.com")
    p.add_argument("--resolver-ip", default="10.0.0.53")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dns-cpm", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file mirroring the flags")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="run detection over a capture")
    a.add_argument("--pcap", required=True)
    a.add_argument("--resolver", default=None, help="resolver IP; responses to other hosts are ignored")
    a.add_argument("--labels", help="packet_index,label CSV aligned with the filtered stream")
    a.add_argument("--intended", type=int, default=None, help="attacker's intended packet count for ASR")
    a.add_argument("--out-verdicts", default="verdicts.csv")
    a.add_argument("--out-metrics", default="metrics.json", help="JSON, or CSV if the name ends in .csv")
    a.add_argument("--emit-pcap", help="write the forwarded/truncated stream here")
    _engine_flags(a)

    g = sub.add_parser("generate", help="synthesize a scenario capture and labels")
    _scenario_flags(g, required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", required=True)
    g.add_argument("--labels", required=True)

    s = sub.add_parser("sweep", help="FP/ASR over a (d, w) grid")
    _scenario_flags(s, required=False)
    s.add_argument("--d-grid", type=_int_list, default=[2, 3, 4, 5])
    s.add_argument("--w-grid", type=_int_list, default=[100, 200, 500])
    s.add_argument("--repeats", type=int, default=1)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", required=True)
    _engine_flags(s)

    c = sub.add_parser("costmodel", help="memory/error/inference table for CMS, dwsHH, WS")
    c.add_argument("--out", help="CSV path (stdout when omitted)")
    return parser


def _spec_from(args: argparse.Namespace, seed: int) -> ScenarioSpec:
    kind = ScenarioKind(args.scenario)
    noise = args.noise_count
    if noise is None:
        noise = 10000 if kind is ScenarioKind.BENIGN_ONLY else 1000
    domains = None
    if args.domains:
        domains = tuple(trafficgen.load_domain_list(args.domains))
    return ScenarioSpec(
        kind=kind,
        seed=seed,
        attack_domain=args.attack_domain,
        attack_count=args.attack_count,
        attack_window_ms=args.rate_ms,
        noise_count=noise,
        noise_domains=domains,
        noise_rate_pps=args.noise_rate,
        resolver_ip=args.resolver_ip,
    )


def _config_from(args: argparse.Namespace, seed: int, resolver: str | None = None) -> engine.EngineConfig:
    return engine.EngineConfig(
        tau=args.tau,
        check_interval=args.interval,
        window_seconds=args.window,
        d=args.cms_d,
        w=args.cms_w,
        resolver_ip=resolver,
        seed=seed,
    )


def cmd_analyze(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    config = _config_from(args, seed, args.resolver)
    if not Path(args.pcap).is_file():
        raise BadInput(f"no such capture: {args.pcap}")
    stats = pcapio.ReadStats()
    stream = pcapio.read_capture(args.pcap, args.resolver, stats)
    labels = None
    if args.labels:
        labels = trafficgen.read_labels(args.labels)
        if len(labels) != len(stream):
            raise BadInput(f"{len(labels)} labels for {len(stream)} packets in {args.pcap}")
    emitted: list | None = [] if args.emit_pcap else None
    verdicts, metrics = engine.process(
        config, stream, labels, intended_total=args.intended, emitted=emitted, malformed=stats.malformed
    )
    _atomic_write(args.out_verdicts, engine.verdicts_csv(stream, verdicts))
    if str(args.out_metrics).endswith(".csv"):
        _atomic_write(args.out_metrics, engine.metrics_csv(metrics))
    else:
        _atomic_write(args.out_metrics, metrics.to_json() + "\n")
    if emitted is not None:
        pcapio.write_capture(args.emit_pcap, emitted)
    print(
        f"{metrics.total} packets: {metrics.forwarded} forwarded, {metrics.truncated} truncated, "
        f"{metrics.dropped} dropped, {metrics.malformed} malformed; asr={metrics.asr:.6g} fp={metrics.fp_rate:.6g}"
    )
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    stream = trafficgen.generate(_spec_from(args, seed))
    pcapio.write_capture(args.out, stream.packets)
    _atomic_write(args.labels, trafficgen.labels_csv(stream.labels))
    print(f"wrote {len(stream)} packets ({stream.count('attack')} attack) to {args.out}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.repeats < 1:
        raise BadInput("--repeats must be >= 1")
    rows = engine.sweep(
        _spec_from(args, seed),
        args.d_grid,
        args.w_grid,
        repeats=args.repeats,
        base=_config_from(args, seed),
        workers=args.workers,
    )
    _atomic_write(args.out, engine.sweep_csv(rows))
    for r in rows:
        print(f"d={r.d} w={r.w} fp={r.fp_rate:.4f} asr={r.asr:.6g}")
    return EXIT_OK


def cmd_costmodel(args: argparse.Namespace) -> int:
    text = costmodel.cost_table_csv(costmodel.cost_table())
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "generate": cmd_generate, "sweep": cmd_sweep, "costmodel": cmd_costmodel}


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        values = load_config(known.config)
        subparsers = parser._subparsers._group_actions[0].choices  # type: ignore[union-attr]
        used = set()
        for sub in subparsers.values():
            actions = {a.dest: a for a in sub._actions}
            defaults = {}
            for key, raw in values.items():
                action = actions.get(key)
                if action is None or action.dest == "help":
                    continue
                try:
                    defaults[key] = action.type(raw) if action.type else raw
                except (argparse.ArgumentTypeError, ValueError) as exc:
                    raise BadInput(f"{known.config}: bad value for {key}: {exc}") from None
                # a required flag supplied by the file no longer needs the command line
                action.required = False
                used.add(key)
            sub.set_defaults(**defaults)
        for key in values.keys() - used:
            log.warning("ignoring unknown config key %r", key)
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return EXIT_BAD_INPUT if exc.code else EXIT_OK
    except (BadInput, OSError) as exc:
        print(f"dns-cpm: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (BadInput, pcapio.BadCaptureHeader, pcapio.UnsupportedLinkType, trafficgen.MissingDomainList, engine.UnsortedStream) as exc:
        print(f"dns-cpm: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (FileNotFoundError, IsADirectoryError, ValueError) as exc:
        print(f"dns-cpm: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
