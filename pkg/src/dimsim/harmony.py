"""Harmony matrices: which pairs of maneuvers may share the conflict box.

Entry ``1`` means the two maneuvers can be executed simultaneously, ``0``
means they conflict.  Rows and columns follow :func:`all_maneuvers` order.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from dimsim.topology import (
    InvalidGeometry,
    InvalidManeuver,
    Maneuver,
    all_maneuvers,
    exit_arm,
    maneuver_chord,
)

# Canonical 4-way table, rows/cols Va1 Va2 Va3 Vb1 ... Vd3.
TABLE_4WAY = (
    (0, 0, 0, 1, 1, 1, 1, 1, 0, 1, 0, 1),
    (0, 0, 0, 0, 0, 0, 1, 1, 0, 1, 0, 0),
    (0, 0, 0, 1, 0, 0, 0, 0, 1, 1, 0, 0),
    (1, 0, 1, 0, 0, 0, 1, 1, 1, 1, 1, 0),
    (1, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 0),
    (1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1),
    (1, 1, 0, 1, 0, 1, 0, 0, 0, 1, 1, 1),
    (1, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0),
    (0, 0, 1, 1, 0, 0, 0, 0, 0, 1, 0, 0),
    (1, 1, 1, 1, 1, 0, 1, 0, 1, 0, 0, 0),
    (0, 0, 0, 1, 1, 0, 1, 0, 0, 0, 0, 0),
    (1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0),
)


class MatrixFormatError(ValueError):
    pass


def maneuver_index(m: Maneuver, n: int) -> int:
    m.check(n)
    return m.entry * (n - 1) + (m.offset - 1)


def index_maneuver(idx: int, n: int) -> Maneuver:
    size = n * (n - 1)
    if not 0 <= idx < size:
        raise IndexError(f"maneuver index {idx} out of range for n={n}")
    return Maneuver(idx // (n - 1), idx % (n - 1) + 1)


class HarmonyMatrix:
    """Immutable binary compatibility table for an ``n``-arm intersection."""

    __slots__ = ("n", "entries", "_rows", "_hash")

    def __init__(self, n: int, entries) -> None:
        arr = np.array(entries, dtype=np.uint8)
        size = n * (n - 1)
        if arr.shape != (size, size):
            raise InvalidGeometry(f"expected a {size}x{size} matrix for n={n}, got {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise ValueError("harmony entries must be 0 or 1")
        arr.setflags(write=False)
        self.n = n
        self.entries = arr
        # plain tuples are much faster than numpy scalar indexing in the hot loop
        self._rows = tuple(tuple(bool(x) for x in row) for row in arr.tolist())
        self._hash = hash((n, arr.tobytes()))

    def __call__(self, m1: Maneuver, m2: Maneuver) -> bool:
        return harmony(m1, m2, self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HarmonyMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.entries, other.entries)

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"HarmonyMatrix(n={self.n})"

    @property
    def maneuvers(self) -> list[Maneuver]:
        return all_maneuvers(self.n)

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))

    def lookup(self, i: int, j: int) -> bool:
        return self._rows[i][j]


def harmony(m1: Maneuver, m2: Maneuver, H: HarmonyMatrix) -> bool:
    try:
        i = maneuver_index(m1, H.n)
        j = maneuver_index(m2, H.n)
    except InvalidManeuver as exc:
        raise IndexError(str(exc)) from exc
    return H._rows[i][j]


def _interleaved(p: tuple[float, float], q: tuple[float, float]) -> bool:
    lo, hi = sorted(p)
    c_in = lo < q[0] < hi
    d_in = lo < q[1] < hi
    return c_in != d_in


def generate_harmony(n: int) -> HarmonyMatrix:
    """Chord-interleaving conflict model on a circle.

    Two maneuvers conflict when they share an entry arm, share an exit arm, or
    when their chords cross.  Entry and exit points never coincide, so the
    strict interleaving test is exact.
    """
    if n < 3:
        raise InvalidGeometry("harmony matrices need n >= 3")
    mans = all_maneuvers(n)
    chords = [maneuver_chord(m, n) for m in mans]
    exits = [exit_arm(m, n) for m in mans]
    size = len(mans)
    out = np.zeros((size, size), dtype=np.uint8)
    for i in range(size):
        for j in range(i + 1, size):
            if mans[i].entry == mans[j].entry or exits[i] == exits[j]:
                continue
            if _interleaved(chords[i], chords[j]):
                continue
            out[i, j] = out[j, i] = 1
    return HarmonyMatrix(n, out)


def table_4way() -> HarmonyMatrix:
    return HarmonyMatrix(4, TABLE_4WAY)


def default_harmony(n: int) -> HarmonyMatrix:
    """The canonical table for n=4, the generator otherwise."""
    return table_4way() if n == 4 else generate_harmony(n)


# -- plain-text persistence ---------------------------------------------------

def dumps(H: HarmonyMatrix) -> str:
    labels = [m.name for m in H.maneuvers]
    width = max(len(s) for s in labels)
    lines = [f"n={H.n}", " ".join(["*".ljust(width)] + [s.ljust(width) for s in labels]).rstrip()]
    for label, row in zip(labels, H.entries.tolist()):
        cells = [str(v).ljust(width) for v in row]
        lines.append(" ".join([label.ljust(width)] + cells).rstrip())
    return "\n".join(lines) + "\n"


def loads(text: str) -> HarmonyMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("n="):
        raise MatrixFormatError("first line must be n=<int>")
    try:
        n = int(lines[0][2:])
    except ValueError as exc:
        raise MatrixFormatError(f"bad header {lines[0]!r}") from exc
    if n < 3:
        raise MatrixFormatError("n must be >= 3")
    expected = [m.name for m in all_maneuvers(n)]
    if len(lines) != len(expected) + 2:
        raise MatrixFormatError(f"expected {len(expected) + 1} grid lines, got {len(lines) - 1}")
    header = lines[1].split()
    if header[1:] != expected:
        raise MatrixFormatError("column labels do not match maneuver order")
    rows = []
    for label, line in zip(expected, lines[2:]):
        tokens = line.split()
        if tokens[0] != label:
            raise MatrixFormatError(f"row label {tokens[0]!r}, expected {label!r}")
        if len(tokens) != len(expected) + 1 or any(t not in ("0", "1") for t in tokens[1:]):
            raise MatrixFormatError(f"malformed row {label}")
        rows.append([int(t) for t in tokens[1:]])
    return HarmonyMatrix(n, rows)


def save(H: HarmonyMatrix, path: str | Path) -> None:
    Path(path).write_text(dumps(H))


def load(path: str | Path) -> HarmonyMatrix:
    return loads(Path(path).read_text())
