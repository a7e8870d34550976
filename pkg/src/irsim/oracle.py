"""Stand-alone synchronous Life on a torus, for cross-checking the kernel.

Deliberately shares nothing with the kernel path: live cells are a set of
coordinates and neighbour counts come from a Counter.
"""

from collections import Counter

_OFFSETS = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if dr or dc]


def live_set(rows):
    return {(r, c) for r, row in enumerate(rows) for c, v in enumerate(row) if v}


def oracle_step(live, height, width):
    counts = Counter(((r + dr) % height, (c + dc) % width) for r, c in live for dr, dc in _OFFSETS)
    return {cell for cell, n in counts.items() if n == 3 or (n == 2 and cell in live)}


def oracle_run(rows, steps):
    """Evolve a 2-d 0/1 grid (list of rows) ``steps`` times; yields the live set after each step."""
    height, width = len(rows), len(rows[0])
    live = live_set(rows)
    for _ in range(steps):
        live = oracle_step(live, height, width)
        yield live


def to_rows(live, height, width):
    return [[(r, c) in live for c in range(width)] for r in range(height)]
