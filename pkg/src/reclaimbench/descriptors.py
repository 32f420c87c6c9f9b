"""Scheme capability records, structure/scheme pairing rules, and session
configuration shared by both backends."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

SCHEMES = {
    "none": 0,
    "ebr": 1,
    "hp": 2,
    "he": 3,
    "pophp": 4,
    "pophe": 5,
    "epochpop": 6,
    "nbr": 7,
    "nbrplus": 8,
    # test-only: frees on retire with no synchronization; proves the
    # use-after-free oracle actually bites.  Never part of the pairing matrix.
    "unsafe": 9,
}

STRUCTURES = {
    "lazy_list": 0,
    "harris_list": 1,
    "hm_list": 2,
    "hash_table": 3,
    "ext_bst": 4,
}

HANDLER_NONE = 0
HANDLER_NBR = 1
HANDLER_POP = 2


@dataclass(frozen=True)
class SchemeDescriptor:
    """What a structure must provide for a scheme to be wired in."""

    kind: str
    needs_read_hook: bool = False
    needs_phase_markers: bool = False
    needs_op_brackets: bool = False
    needs_era_header: bool = False
    restart_capable: bool = False
    max_reservations: int = 3

    @property
    def handler_kind(self) -> int:
        if self.kind in ("nbr", "nbrplus"):
            return HANDLER_NBR
        if self.kind in ("pophp", "pophe", "epochpop"):
            return HANDLER_POP
        return HANDLER_NONE

    def check(self) -> None:
        if self.kind in ("nbr", "nbrplus"):
            assert self.needs_phase_markers and self.restart_capable
        if self.kind in ("hp", "he", "pophp", "pophe"):
            assert self.needs_read_hook


DESCRIPTORS = {
    "none": SchemeDescriptor("none"),
    "unsafe": SchemeDescriptor("unsafe"),
    "ebr": SchemeDescriptor("ebr", needs_op_brackets=True),
    "hp": SchemeDescriptor("hp", needs_read_hook=True),
    "he": SchemeDescriptor("he", needs_read_hook=True, needs_era_header=True),
    "pophp": SchemeDescriptor("pophp", needs_read_hook=True),
    "pophe": SchemeDescriptor("pophe", needs_read_hook=True, needs_era_header=True),
    "epochpop": SchemeDescriptor("epochpop", needs_read_hook=True, needs_op_brackets=True),
    "nbr": SchemeDescriptor("nbr", needs_phase_markers=True, restart_capable=True),
    "nbrplus": SchemeDescriptor("nbrplus", needs_phase_markers=True, restart_capable=True),
}

ALL_SCHEMES = ["none", "ebr", "hp", "he", "pophp", "pophe", "epochpop", "nbr", "nbrplus"]

# Which schemes each structure supports.  The optimistic lazy list and the
# deferred-unlink list traverse logically deleted nodes, which rules out the
# pointer-reservation family; era reservations on the deferred-unlink list
# are additionally gated behind an explicit override because a reader that
# refreshes its era mid-chain can step onto a freed node (the classic trace
# against era schemes on such lists).
_PAIRINGS = {
    "lazy_list": ["none", "ebr", "nbr", "nbrplus", "epochpop"],
    "harris_list": ["none", "ebr", "nbr", "nbrplus", "epochpop"],
    "hm_list": list(ALL_SCHEMES),
    "hash_table": list(ALL_SCHEMES),
    "ext_bst": list(ALL_SCHEMES),
}

_HARRIS_ERA_OVERRIDE = ["he", "pophe"]


class PairingMatrix:
    """structure x scheme applicability relation."""

    def __init__(self, harris_era_override: bool = False):
        self._allowed = {s: list(v) for s, v in _PAIRINGS.items()}
        if harris_era_override:
            self._allowed["harris_list"] = (
                self._allowed["harris_list"] + _HARRIS_ERA_OVERRIDE
            )

    def allows(self, structure: str, scheme: str) -> bool:
        return scheme in self._allowed.get(structure, [])

    def schemes_for(self, structure: str) -> list[str]:
        return list(self._allowed[structure])

    def pairs(self) -> list[tuple[str, str]]:
        return [(ds, s) for ds in STRUCTURES for s in self._allowed[ds]]


class InvalidPairing(ValueError):
    pass


class RegistryFull(RuntimeError):
    pass


class AlreadyRegistered(RuntimeError):
    pass


class TooManyReservations(ValueError):
    pass


class TrialAborted(RuntimeError):
    """A validate-mode violation stopped the trial."""


DEFAULT_KEY_RANGE = {
    "lazy_list": 2_000,
    "harris_list": 2_000,
    "hm_list": 2_000,
    "hash_table": 6_144,  # load factor ~6 over the default 1024 buckets
    "ext_bst": 2_000_000,
}


def default_alloc_mode() -> str:
    mode = os.environ.get("RECLAIM_ALLOC_MODE", "release")
    if mode not in ("release", "validate"):
        raise ValueError(f"RECLAIM_ALLOC_MODE must be release|validate, got {mode!r}")
    return mode


@dataclass
class SessionConfig:
    """Everything one trial/session needs, with paper-derived defaults."""

    threads: int
    scheme: str
    structure: str
    key_range: int = 0  # 0 = per-structure default
    alloc_mode: str = field(default_factory=default_alloc_mode)
    buckets: int = 1024
    max_hp: int = 3
    max_he: int = 3
    reclaim_freq: int = 32_000
    pop_reclaim_freq: int = 0  # 0 = inherit reclaim_freq
    epoch_freq: int = 100
    nbr_hi_watermark: int = 16_384
    nbr_lo_fraction: float = 0.5
    nbr_scan_amortization: int = 64  # retires between timestamp scans
    nbr_max_reservations: int = 3
    epochpop_c: float = 2.0
    # must dominate this machine's worst-case signal delivery to a *running*
    # thread (calibrate with `bench sigprobe`); virtualized hosts deliver the
    # cross-core interrupt orders of magnitude slower than bare metal
    post_broadcast_delay_ns: int = 200_000
    quarantine_cap: int = 1 << 20
    hm_restart_from_head: int = -1  # -1 auto (on for nbr/nbrplus), 0 off, 1 on
    mem_budget_bytes: int = 1_500_000_000
    harris_era_override: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}")
        if self.alloc_mode not in ("release", "validate"):
            raise ValueError(f"alloc_mode must be release|validate")
        if self.key_range <= 0:
            self.key_range = DEFAULT_KEY_RANGE[self.structure]

    @property
    def effective_reclaim_freq(self) -> int:
        if self.scheme in ("pophp", "pophe", "epochpop") and self.pop_reclaim_freq:
            return self.pop_reclaim_freq
        return self.reclaim_freq

    @property
    def reclaim_threshold(self) -> int:
        """The bag size that triggers reclamation for this scheme."""
        if self.scheme in ("nbr", "nbrplus"):
            return self.nbr_hi_watermark
        return self.effective_reclaim_freq

    def descriptor(self) -> SchemeDescriptor:
        return DESCRIPTORS[self.scheme]

    def validate_pairing(self) -> None:
        if self.scheme == "unsafe":
            return  # oracle self-test only
        matrix = PairingMatrix(harris_era_override=self.harris_era_override)
        if not matrix.allows(self.structure, self.scheme):
            raise InvalidPairing(f"{self.structure} does not support {self.scheme}")

    def scaled(self, **kw) -> "SessionConfig":
        return replace(self, **kw)


COUNTER_NAMES = [
    "signals_sent",
    "signals_received",
    "handler_entries",
    "restarts",
    "pings_sent",
    "fences_on_read_path",
    "slow_path_triggers",
    "retired_current",
    "peak_retired_nodes",
    "reclaim_passes",
    "epoch",
    "lowm_piggybacks",
    "broadcasts",
    "violations",
]

ALLOC_STAT_NAMES = [
    "live_bytes",
    "peak_live_bytes",
    "allocations",
    "frees",
    "quarantined",
    "peak_retired_nodes",
]

VIOLATION_KINDS = [
    "poison_access",
    "double_free",
    "double_retire",
    "alloc_in_read_phase",
]
