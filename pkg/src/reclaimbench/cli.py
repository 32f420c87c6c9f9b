"""bench: run trials, sweep a matrix, probe signal latency, compare backends.

    bench run --ds hm_list --smr nbrplus --threads 8 --duration 10 \
              --workload 50:50:0 --alloc validate --out out.csv
    bench sweep --matrix sweep.toml --out results/
    bench sigprobe --samples 10000
    bench backends
"""

from __future__ import annotations

import argparse
import json
import sys

from .backends import default_backend
from .bench import (
    TrialConfig,
    compare_backends,
    emit_csv,
    run_series,
    sigprobe,
    sweep,
)
from .descriptors import ALL_SCHEMES, STRUCTURES


def _parse_workload(s: str) -> tuple[int, int, int]:
    parts = s.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("workload must be INSERT:DELETE:CONTAINS")
    i, d, c = (int(p) for p in parts)
    return (i, d, c)


def _parse_override(s: str) -> tuple[str, object]:
    if "=" not in s:
        raise argparse.ArgumentTypeError("--set expects key=value")
    k, v = s.split("=", 1)
    for cast in (int, float):
        try:
            return k, cast(v)
        except ValueError:
            continue
    return k, v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bench", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="run one trial series and append CSV rows")
    run.add_argument("--ds", required=True, choices=sorted(STRUCTURES))
    run.add_argument("--smr", required=True, choices=ALL_SCHEMES)
    run.add_argument("--threads", type=int, default=4)
    run.add_argument("--duration", type=float, default=2.0)
    run.add_argument("--workload", type=_parse_workload, default=(25, 25, 50))
    run.add_argument("--key-range", type=int, default=0)
    run.add_argument("--trials", type=int, default=3)
    run.add_argument("--stall", choices=["none", "one"], default="none")
    run.add_argument("--alloc", choices=["release", "validate"], default=None)
    run.add_argument("--seed", type=int, default=1)
    run.add_argument("--prefill", type=float, default=0.5)
    run.add_argument("--out", default=None, help="CSV path (append mode)")
    run.add_argument("--backend", choices=["c", "py"], default=None)
    run.add_argument("--set", dest="overrides", type=_parse_override,
                     action="append", default=[],
                     help="scheme config override, e.g. --set reclaim_freq=4096")

    sw = sub.add_parser("sweep", help="run the cross product described in a TOML file")
    sw.add_argument("--matrix", required=True)
    sw.add_argument("--out", required=True, help="output directory, one CSV per structure")

    sp = sub.add_parser("sigprobe", help="measure directed-signal latency")
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--no-pin", action="store_true")

    sub.add_parser("backends", help="compare compiled core vs pure-Python fallback")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.cmd == "run":
        kwargs = dict(
            structure=args.ds,
            scheme=args.smr,
            threads=args.threads,
            duration=args.duration,
            key_range=args.key_range,
            workload=args.workload,
            trials=args.trials,
            prefill=args.prefill,
            stall="sleep_one_thread" if args.stall == "one" else "none",
            seed=args.seed,
            backend=args.backend,
            overrides=dict(args.overrides),
        )
        if args.alloc:
            kwargs["alloc_mode"] = args.alloc
        records = run_series(TrialConfig(**kwargs))
        if args.out:
            emit_csv(records, args.out, append=True)
        for r in records:
            print(
                f"{r.structure}/{r.scheme} x{r.threads} seed={r.seed}: "
                f"{r.throughput_ops_per_s / 1e6:.3f} Mops/s, "
                f"peak_retired={r.peak_retired_nodes}, signals={r.signals_sent}, "
                f"violations={r.violations}"
            )
        return 1 if any(r.violations for r in records) else 0

    if args.cmd == "sweep":
        def progress(rec):
            print(
                f"  {rec.structure}/{rec.scheme} x{rec.threads} "
                f"{rec.insert_pct}:{rec.delete_pct}:{rec.contains_pct} "
                f"stall={rec.stall}: {rec.throughput_ops_per_s / 1e6:.3f} Mops/s",
                flush=True,
            )

        written = sweep(args.matrix, args.out, progress=progress)
        for ds, path in written.items():
            print(f"wrote {path}")
        return 0

    if args.cmd == "sigprobe":
        out = sigprobe(args.samples, pin=not args.no_pin)
        print(json.dumps(out, indent=2))
        if not out["pinned"]:
            print("warning: core pinning unavailable, latencies are unpinned",
                  file=sys.stderr)
        return 0

    if args.cmd == "backends":
        print(f"default backend: {default_backend()}")
        rows = compare_backends()
        print(f"{'backend':8s} {'scheme':9s} {'Mops/s':>9s} {'violations':>10s}")
        for r in rows:
            print(
                f"{r['backend']:8s} {r['scheme']:9s} "
                f"{r['throughput_ops_per_s'] / 1e6:9.3f} {r['violations']:10d}"
            )
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
