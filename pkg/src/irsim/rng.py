"""Counter-based random streams.

Every draw is a pure function of ``(root seed, replication, level, tick,
entity, counter)``, hashed with the splitmix64 finalizer.  Draws therefore do
not depend on the order in which cells, regions or replications are
processed, which is what makes runs bit-identical for any degree of
parallelism.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))


def _mix(x: np.ndarray) -> np.ndarray:
    x = x + _GOLDEN
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


def _as_u64(value) -> int:
    if isinstance(value, (int, np.integer)):
        return int(value) & _MASK
    digest = hashlib.blake2b(repr(value).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _base(root, replication, level, tick) -> np.ndarray:
    h = np.array([_as_u64(root)], dtype=np.uint64)
    with np.errstate(over="ignore"):
        for part in (replication, level, tick):
            h = _mix(h ^ np.uint64(_as_u64(part)))
    return h


def _to_unit(h: np.ndarray) -> np.ndarray:
    # top 53 bits -> [0, 1)
    return (h >> _S11).astype(np.float64) * (1.0 / (1 << 53))


def uniform_field(root, replication, level, tick, entities, counter: int = 0) -> np.ndarray:
    """One uniform draw in [0, 1) per entity index, keyed by the full tuple."""
    ent = np.asarray(entities, dtype=np.uint64)
    base = _base(root, replication, level, tick)
    with np.errstate(over="ignore"):
        h = _mix(base ^ _mix(ent))
        if counter:
            h = _mix(h ^ np.uint64(counter & _MASK))
    return _to_unit(h)


@dataclass(frozen=True)
class RngStream:
    """A deterministic stream of uniforms for one derivation key."""

    root: int
    key: tuple

    def uniform(self, n: int | None = None, start: int = 0):
        replication, level, tick, entity = self.key
        base = _base(self.root, replication, level, tick)
        counters = np.arange(start, start + (1 if n is None else n), dtype=np.uint64)
        with np.errstate(over="ignore"):
            h = _mix(_mix(base ^ _mix(np.array([_as_u64(entity)], dtype=np.uint64))) ^ counters)
        out = _to_unit(h)
        return float(out[0]) if n is None else out


def derive_stream(root: int, key: tuple) -> RngStream:
    if len(key) != 4:
        raise ValueError("stream key is (replication, level, tick, entity)")
    return RngStream(int(root), tuple(key))


def replication_seed(root: int, replication: int) -> int:
    """Stable per-replication seed for grid initialisation."""
    h = _base(root, replication, "init", 0)
    return int(h[0])
