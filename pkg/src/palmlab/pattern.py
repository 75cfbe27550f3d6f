"""Point patterns on a finite observation window.

A pattern is a finite, strictly increasing set of event times inside a
window [lo, hi] with lo < 0 < hi.  Event indexing follows the convention
that T_0 is the largest time <= 0 and T_1 the smallest time > 0; other
indices are offsets from there.  Counting uses half-open intervals (a, b].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfPattern, NoStraddle, OutsideWindow, InsufficientContext

# Simpleness guard: two events closer than this are a construction error.
MIN_GAP = 1e-12


@dataclass(frozen=True)
class IndexedPoint:
    """An event together with its index in the T_n convention."""

    index: int
    time: float


@dataclass(frozen=True)
class PointPattern:
    """Immutable sorted realization on a window. All operations are pure."""

    points: np.ndarray
    window: tuple[float, float]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        lo, hi = self.window
        object.__setattr__(self, "window", (float(lo), float(hi)))
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("pattern must hold at least one event time")
        if not (lo < 0.0 < hi):
            raise ValueError(f"window must contain the origin in its interior, got {self.window}")
        if pts[0] < lo or pts[-1] > hi:
            raise OutsideWindow(f"events outside window [{lo}, {hi}]")
        if pts.size > 1 and np.min(np.diff(pts)) <= MIN_GAP:
            raise ValueError(f"events closer than {MIN_GAP}; patterns must be simple")

    # -- indexing -------------------------------------------------------

    def locate_indices(self) -> tuple[int, int]:
        """Array positions (pos0, pos1) of T_0 and T_1.

        Raises NoStraddle when all events sit on one side of the origin.
        """
        pos1 = int(np.searchsorted(self.points, 0.0, side="right"))
        if pos1 == 0 or pos1 == self.points.size:
            raise NoStraddle("pattern does not straddle the origin")
        return pos1 - 1, pos1

    def position(self, n: int) -> int:
        """Array position of T_n; raises IndexOutOfPattern if absent.

        T_0 exists whenever some event is <= 0 and T_1 whenever some event
        is > 0; neither requires the other side to be occupied.
        """
        pos = int(np.searchsorted(self.points, 0.0, side="right")) - 1 + n
        if pos < 0 or pos >= self.points.size:
            raise IndexOutOfPattern(f"T_{n} is not inside the window")
        return pos

    def t(self, n: int) -> float:
        """Time of event T_n."""
        return float(self.points[self.position(n)])

    def event(self, n: int) -> IndexedPoint:
        return IndexedPoint(n, self.t(n))

    def interval(self, n: int) -> float:
        """Gap length between T_n and T_n+1 (always > 0)."""
        pos = self.position(n)
        if pos + 1 >= self.points.size:
            raise IndexOutOfPattern(f"T_{n + 1} is not inside the window")
        return float(self.points[pos + 1] - self.points[pos])

    # -- shifts ---------------------------------------------------------

    def shift_time(self, y: float) -> "PointPattern":
        """View from position y: events move to T_k - y, window moves with them."""
        if y == 0.0:
            return self
        lo, hi = self.window
        return PointPattern(self.points - y, (lo - y, hi - y))

    def shift_event(self, n: int) -> "PointPattern":
        """View from event T_n; the result has an event at exactly 0."""
        return self.shift_time(self.t(n))

    # -- counting -------------------------------------------------------

    def count(self, a: float, b: float) -> int:
        """Number of events in (a, b]."""
        lo, hi = self.window
        if a > b:
            raise ValueError("need a <= b")
        if a < lo or b > hi:
            raise OutsideWindow(f"({a}, {b}] not contained in [{lo}, {hi}]")
        right = np.searchsorted(self.points, b, side="right")
        left = np.searchsorted(self.points, a, side="right")
        return int(right - left)

    def count_marked(self, a: float, b: float, eventuality, radius: float | None = None) -> int:
        """Number of events T_n in (a, b] whose re-centered view satisfies the eventuality.

        Every counted event needs the window to cover [T_n - r, T_n + r],
        where r is the eventuality's dependency radius (or the given
        override); otherwise InsufficientContext is raised rather than
        silently truncating.
        """
        lo, hi = self.window
        n_total = self.count(a, b)
        if n_total == 0:
            return 0
        r = radius if radius is not None else eventuality.radius
        if r is None:
            raise InsufficientContext(
                f"eventuality {eventuality.label!r} has no bounded radius; pass one explicitly"
            )
        left = int(np.searchsorted(self.points, a, side="right"))
        hits = 0
        for pos in range(left, left + n_total):
            tn = float(self.points[pos])
            if tn - r < lo or tn + r > hi:
                raise InsufficientContext(
                    f"window does not cover radius {r} around event at {tn}"
                )
            value = eventuality.evaluate(self.shift_time(tn))
            if value is None:
                raise InsufficientContext(
                    f"eventuality {eventuality.label!r} indeterminate at event {tn}"
                )
            hits += int(value)
        return hits

    # -- misc -----------------------------------------------------------

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.points)

    def __len__(self) -> int:
        return int(self.points.size)


@dataclass(frozen=True)
class PatternBatch:
    """Many replications packed into flat arrays (rows sorted per replication).

    ``points[offsets[i]:offsets[i+1]]`` are replication i's event times and
    ``windows[i]`` its window.  Samplers emit batches; estimator kernels
    work on them without materializing per-replication objects.
    """

    points: np.ndarray    # float64, concatenated
    offsets: np.ndarray   # int64, len n+1
    windows: np.ndarray   # float64, shape (n, 2)
    weights: np.ndarray   # float64, shape (n,)

    @property
    def n(self) -> int:
        return int(self.offsets.size - 1)

    def pattern(self, i: int) -> PointPattern:
        lo, hi = self.windows[i]
        return PointPattern(self.points[self.offsets[i]:self.offsets[i + 1]].copy(), (lo, hi))

    def straddle_positions(self) -> np.ndarray:
        """Array position of T_0 per replication; -1 where the origin is not straddled."""
        nonpos = self.points <= 0.0
        counts = np.add.reduceat(nonpos, self.offsets[:-1])
        counts[self.offsets[:-1] == self.offsets[1:]] = 0
        pos0 = self.offsets[:-1] + counts - 1
        sizes = np.diff(self.offsets)
        bad = (counts == 0) | (counts == sizes)
        pos0 = np.where(bad, -1, pos0)
        return pos0

    def global_sorted(self) -> tuple[np.ndarray, np.ndarray]:
        """Points offset per replication so the flat array is globally sorted.

        Returns (shifted_points, per-replication shift).  Lets a single
        searchsorted answer per-replication interval queries.
        """
        span = float(np.max(np.abs(self.windows))) if self.windows.size else 1.0
        stride = 4.0 * span + 4.0
        shifts = stride * np.arange(self.n, dtype=np.float64)
        rep_of_point = np.repeat(np.arange(self.n), np.diff(self.offsets))
        return self.points + shifts[rep_of_point], shifts


def ragged_ranges(starts: np.ndarray, stops: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flat indices covering [starts[i], stops[i]) for each row i.

    Returns (flat_index, row_id) arrays.
    """
    lengths = stops - starts
    lengths = np.maximum(lengths, 0)
    total = int(lengths.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    row_id = np.repeat(np.arange(starts.size), lengths)
    head = np.cumsum(lengths) - lengths
    flat = np.arange(total, dtype=np.int64) - np.repeat(head, lengths) + np.repeat(starts, lengths)
    return flat, row_id


# -- serialization ------------------------------------------------------
#
# One pattern per line: comma-separated ascending timestamps, preceded by a
# header line "# window lo hi" giving that pattern's window.


def write_patterns(path, patterns) -> None:
    with open(path, "w", encoding="utf8") as fh:
        for p in patterns:
            lo, hi = p.window
            fh.write(f"# window {lo!r} {hi!r}\n")
            fh.write(",".join(repr(float(t)) for t in p.points) + "\n")


def read_patterns(path) -> list[PointPattern]:
    out: list[PointPattern] = []
    window: tuple[float, float] | None = None
    with open(path, "r", encoding="utf8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = line[1:].split()
                if len(fields) == 3 and fields[0] == "window":
                    window = (float(fields[1]), float(fields[2]))
                continue
            if window is None:
                raise ValueError("pattern line before any '# window lo hi' header")
            pts = np.array([float(tok) for tok in line.split(",")], dtype=np.float64)
            out.append(PointPattern(pts, window))
    return out
