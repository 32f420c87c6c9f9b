"""Trial runner, sweeps, CSV emission, and the signal-latency probe."""

from __future__ import annotations

import csv
import os
import statistics
import threading
from dataclasses import dataclass, field, fields
from pathlib import Path

from .backends import default_backend, open_session
from .descriptors import (
    ALL_SCHEMES,
    PairingMatrix,
    SessionConfig,
    STRUCTURES,
    default_alloc_mode,
)

STALL_MODES = ("none", "sleep_one_thread")


@dataclass
class TrialConfig:
    structure: str
    scheme: str
    threads: int
    duration: float = 2.0
    key_range: int = 0
    workload: tuple[int, int, int] = (25, 25, 50)  # insert/delete/contains %
    trials: int = 3
    prefill: float = 0.5
    stall: str = "none"
    alloc_mode: str = field(default_factory=default_alloc_mode)
    seed: int = 1
    backend: str | None = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if sum(self.workload) != 100:
            raise ValueError(f"workload percentages must sum to 100: {self.workload}")
        if self.stall not in STALL_MODES:
            raise ValueError(f"stall must be one of {STALL_MODES}")

    def session_config(self) -> SessionConfig:
        cfg = SessionConfig(
            threads=self.threads,
            scheme=self.scheme,
            structure=self.structure,
            key_range=self.key_range,
            alloc_mode=self.alloc_mode,
            **self.overrides,
        )
        cfg.validate_pairing()
        return cfg


# CSV schema: every TrialConfig field, then the measured columns.
RECORD_FIELDS = [
    "structure",
    "scheme",
    "threads",
    "duration",
    "key_range",
    "insert_pct",
    "delete_pct",
    "contains_pct",
    "trials",
    "prefill",
    "stall",
    "alloc_mode",
    "seed",
    "ops_total",
    "throughput_ops_per_s",
    "peak_live_bytes",
    "peak_retired_nodes",
    "signals_sent",
    "restarts",
    "fences_on_read_path",
    "slow_path_triggers",
    "violations",
]


@dataclass
class TrialRecord:
    structure: str
    scheme: str
    threads: int
    duration: float
    key_range: int
    insert_pct: int
    delete_pct: int
    contains_pct: int
    trials: int
    prefill: float
    stall: str
    alloc_mode: str
    seed: int
    ops_total: int
    throughput_ops_per_s: float
    peak_live_bytes: int
    peak_retired_nodes: int
    signals_sent: int
    restarts: int
    fences_on_read_path: int
    slow_path_triggers: int
    violations: int

    def row(self) -> list:
        return [getattr(self, f) for f in RECORD_FIELDS]

    @classmethod
    def from_row(cls, row: dict) -> "TrialRecord":
        return cls(**{f.name: _coerce(f.name, row[f.name]) for f in fields(cls)})


_FLOATS = {"duration", "prefill", "throughput_ops_per_s"}
_STRINGS = {"structure", "scheme", "stall", "alloc_mode"}


def _coerce(name: str, v: str):
    if name in _STRINGS:
        return v
    if name in _FLOATS:
        return float(v)
    return int(v)


def run_trial(tc: TrialConfig) -> TrialRecord:
    """Register `threads` workers, prefill, run the timed phase, drain."""
    scfg = tc.session_config()
    sess = open_session(scfg, tc.backend)
    ins, dele, _ = tc.workload
    results: dict[int, dict] = {}
    errors: list[BaseException] = []

    def work():
        try:
            tid = sess.register()
            results[tid] = sess.worker_run(
                tid,
                tc.duration,
                ins,
                dele,
                tc.seed,
                stall=(tc.stall == "sleep_one_thread" and tid == 0),
                prefill=tc.prefill,
            )
        except BaseException as e:  # surfaced after join
            errors.append(e)

    try:
        workers = [threading.Thread(target=work) for _ in range(tc.threads)]
        for w in workers:
            w.start()
        for w in workers:
            w.join()
        if errors:
            raise errors[0]
        counters = sess.counters()
        alloc = sess.alloc_stats()
        ops_total = sum(r["ops"] for r in results.values())
        wall = max((r["actual_s"] for r in results.values()), default=tc.duration)
        return TrialRecord(
            structure=tc.structure,
            scheme=tc.scheme,
            threads=tc.threads,
            duration=tc.duration,
            key_range=scfg.key_range,
            insert_pct=ins,
            delete_pct=dele,
            contains_pct=tc.workload[2],
            trials=tc.trials,
            prefill=tc.prefill,
            stall=tc.stall,
            alloc_mode=tc.alloc_mode,
            seed=tc.seed,
            ops_total=ops_total,
            throughput_ops_per_s=ops_total / wall if wall > 0 else 0.0,
            peak_live_bytes=alloc["peak_live_bytes"],
            peak_retired_nodes=counters["peak_retired_nodes"],
            signals_sent=counters["signals_sent"],
            restarts=counters["restarts"],
            fences_on_read_path=counters["fences_on_read_path"],
            slow_path_triggers=counters["slow_path_triggers"],
            violations=counters["violations"],
        )
    finally:
        sess.close()


def run_series(tc: TrialConfig) -> list[TrialRecord]:
    """tc.trials repetitions with per-trial seeds seed, seed+1, ..."""
    out = []
    for i in range(tc.trials):
        one = TrialConfig(**{**tc.__dict__, "seed": tc.seed + i})
        out.append(run_trial(one))
    return out


def emit_csv(records, path, append: bool = False):
    path = Path(path)
    fresh = not (append and path.exists() and path.stat().st_size > 0)
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh)
        if fresh:
            w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow(r.row())


def read_csv(path) -> list[TrialRecord]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        missing = set(RECORD_FIELDS) - set(rd.fieldnames or [])
        if missing:
            raise ValueError(f"missing columns: {sorted(missing)}")
        return [TrialRecord.from_row(row) for row in rd]


# --- sweeps ----------------------------------------------------------------


def _load_toml(path):
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def sweep(matrix_path, out_dir, progress=None) -> dict[str, Path]:
    """Run a cross-product sweep described in a TOML file; one CSV per
    structure lands in out_dir."""
    spec = _load_toml(matrix_path)
    sw = spec.get("sweep", {})
    structures = sw.get("structures", list(STRUCTURES))
    schemes = sw.get("schemes", ["all"])
    threads = sw.get("threads", [1, 2, 4, 8])
    workloads = sw.get("workloads", [[50, 50, 0], [25, 25, 50], [5, 5, 90]])
    duration = float(sw.get("duration", 2.0))
    trials = int(sw.get("trials", 3))
    alloc_mode = sw.get("alloc_mode", default_alloc_mode())
    stalls = sw.get("stall", ["none"])
    seed = int(sw.get("seed", 1))
    key_range = int(sw.get("key_range", 0))
    overrides = dict(spec.get("overrides", {}))
    matrix = PairingMatrix(
        harris_era_override=bool(overrides.pop("harris_era_override", False))
    )
    if schemes == ["all"]:
        schemes = ALL_SCHEMES

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for ds in structures:
        records = []
        for scheme in schemes:
            if not matrix.allows(ds, scheme):
                continue
            for n in threads:
                for wl in workloads:
                    for stall in stalls:
                        tc = TrialConfig(
                            structure=ds,
                            scheme=scheme,
                            threads=n,
                            duration=duration,
                            key_range=key_range,
                            workload=tuple(wl),
                            trials=trials,
                            stall=stall,
                            alloc_mode=alloc_mode,
                            seed=seed,
                            overrides=dict(overrides),
                        )
                        recs = run_series(tc)
                        records.extend(recs)
                        if progress:
                            progress(recs[-1])
        path = out_dir / f"{ds}.csv"
        emit_csv(records, path)
        written[ds] = path
    return written


# --- signal latency probe -----------------------------------------------------


def _cpu_ghz() -> float | None:
    try:
        for line in open("/proc/cpuinfo"):
            if line.lower().startswith("cpu mhz"):
                return float(line.split(":")[1]) / 1000.0
    except (OSError, ValueError):
        pass
    return None


def sigprobe(samples: int, pin: bool = True, backend: str | None = None) -> dict:
    """Measure directed-signal latencies: the send-call cost and the
    send-to-handler-entry time, reported as min/median/p99."""
    if samples <= 0:
        raise ValueError("sigprobe needs a positive sample count")
    be = backend or default_backend()
    if be == "c":
        from .cbackend import sigprobe as _probe

        raw = _probe(samples, pin=pin)
        simulated = False
    else:
        raw = _simulated_probe(samples)
        simulated = True

    def summarize(xs):
        xs = sorted(xs)
        return {
            "min_ns": xs[0],
            "median_ns": xs[len(xs) // 2],
            "p99_ns": xs[min(len(xs) - 1, int(len(xs) * 0.99))],
        }

    ghz = _cpu_ghz()
    out = {
        "samples": samples,
        "pinned": raw["pinned"],
        "simulated": simulated,
        "send": summarize(raw["send_ns"]),
        "e2e": summarize(raw["e2e_ns"]),
        "cpu_ghz": ghz,
    }
    if ghz:
        out["e2e_p99_cycles"] = int(out["e2e"]["p99_ns"] * ghz)
    return out


def _simulated_probe(samples: int) -> dict:
    """Fallback-backend probe over the virtual signal bus (polling latency,
    not OS delivery; reported as simulated)."""
    import time

    from .descriptors import SessionConfig
    from .pybackend import PySession

    sess = PySession(SessionConfig(threads=2, scheme="pophp", structure="hm_list"))
    stop = threading.Event()
    ready = threading.Event()

    def receiver():
        tid = sess.register()
        ready.set()
        while not stop.is_set():
            sess.poll(tid)
            time.sleep(0)

    rt = threading.Thread(target=receiver)
    rt.start()
    ready.wait()
    sender = sess.register()
    send_ns, e2e_ns = [], []
    for _ in range(samples):
        t0 = time.monotonic_ns()
        sess.broadcast(sender)  # returns after the handler ran
        t1 = time.monotonic_ns()
        send_ns.append(t1 - t0)
        e2e_ns.append(t1 - t0)
    stop.set()
    rt.join()
    return {"send_ns": send_ns, "e2e_ns": e2e_ns, "pinned": False}


def compare_backends(duration: float = 1.0, threads: int = 2) -> list[dict]:
    """Same small workload on both backends; the README table comes from this."""
    rows = []
    backends = ["c", "py"] if default_backend() == "c" else ["py"]
    for be in backends:
        for scheme in ("ebr", "hp", "pophp", "nbrplus"):
            tc = TrialConfig(
                structure="hm_list",
                scheme=scheme,
                threads=threads,
                duration=duration,
                workload=(25, 25, 50),
                trials=1,
                backend=be,
                key_range=512,
            )
            rec = run_trial(tc)
            rows.append(
                {
                    "backend": be,
                    "scheme": scheme,
                    "throughput_ops_per_s": rec.throughput_ops_per_s,
                    "violations": rec.violations,
                }
            )
    return rows
