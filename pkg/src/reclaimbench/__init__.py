"""Safe memory reclamation schemes with signal-coordinated variants, five
concurrent sets wired through them, and a benchmark harness.

Two interchangeable backends implement the same session surface: a compiled
core (real directed signals, non-local restarts, true parallelism) and a pure
Python twin (virtual signals at safe points).  `backends.open_session`
selects one; RECLAIM_BACKEND overrides.
"""

from .backends import default_backend, open_session
from .descriptors import (
    ALL_SCHEMES,
    DESCRIPTORS,
    PairingMatrix,
    SCHEMES,
    STRUCTURES,
    SchemeDescriptor,
    SessionConfig,
    InvalidPairing,
    RegistryFull,
    AlreadyRegistered,
    TooManyReservations,
    TrialAborted,
)

__all__ = [
    "ALL_SCHEMES",
    "DESCRIPTORS",
    "PairingMatrix",
    "SCHEMES",
    "STRUCTURES",
    "SchemeDescriptor",
    "SessionConfig",
    "InvalidPairing",
    "RegistryFull",
    "AlreadyRegistered",
    "TooManyReservations",
    "TrialAborted",
    "default_backend",
    "open_session",
]

__version__ = "0.1.0"
