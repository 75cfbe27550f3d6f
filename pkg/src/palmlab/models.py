"""Seedable exact samplers for every process law the toolkit verifies.

Samplers fill the requested window; estimators choose windows wide enough
that shifted evaluations inside their analysis region never reach the
edge.  All samplers are pure functions of (generator, window), so
replications are reproducible and parallelism-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import (
    DegenerateWindow,
    InsufficientContext,
    InsufficientWindow,
    NoMean,
    UnknownTilt,
)
from .pattern import MIN_GAP, PatternBatch, PointPattern

LAW_TS = "TS"
LAW_ES = "ES"
LAW_TILTED_TS = "TILTED_TS"
LAW_DETERMINISTIC = "DETERMINISTIC"


# -- interval distributions ------------------------------------------------


@dataclass(frozen=True)
class IntervalDistribution:
    """Positive gap law with an exact sampler, exact mean, and an exact
    sampler of its length-biased version (density x f(x) / mean)."""

    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.family not in ("exponential", "gamma", "deterministic", "uniform"):
            raise ValueError(f"unknown interval family {self.family!r}")

    @property
    def mean(self) -> float:
        if self.family == "exponential":
            return 1.0 / self.params[0]
        if self.family == "gamma":
            shape, rate = self.params
            return shape / rate
        if self.family == "deterministic":
            return self.params[0]
        a, b = self.params
        return 0.5 * (a + b)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "exponential":
            return rng.exponential(1.0 / self.params[0], size)
        if self.family == "gamma":
            shape, rate = self.params
            return rng.gamma(shape, 1.0 / rate, size)
        if self.family == "deterministic":
            return np.full(size, self.params[0])
        a, b = self.params
        return rng.uniform(a, b, size)

    def sample_length_biased(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.family == "exponential":
            return rng.gamma(2.0, 1.0 / self.params[0], size)
        if self.family == "gamma":
            shape, rate = self.params
            return rng.gamma(shape + 1.0, 1.0 / rate, size)
        if self.family == "deterministic":
            return np.full(size, self.params[0])
        # inverse CDF of x f(x)/m on [a, b]: F(x) = (x^2 - a^2)/(b^2 - a^2)
        a, b = self.params
        u = rng.random(size)
        return np.sqrt(a * a + u * (b * b - a * a))

    @property
    def label(self) -> str:
        inner = ",".join(repr(p) for p in self.params)
        return f"{self.family}({inner})"


def exponential(rate: float) -> IntervalDistribution:
    if not rate > 0:
        raise ValueError("need rate > 0")
    return IntervalDistribution("exponential", (float(rate),))


def gamma_intervals(shape: float, rate: float) -> IntervalDistribution:
    if not (shape > 0 and rate > 0):
        raise ValueError("need shape > 0 and rate > 0")
    return IntervalDistribution("gamma", (float(shape), float(rate)))


def deterministic(value: float) -> IntervalDistribution:
    if not value > 0:
        raise ValueError("need value > 0")
    return IntervalDistribution("deterministic", (float(value),))


def uniform_intervals(a: float, b: float) -> IntervalDistribution:
    if not (0 <= a < b):
        raise ValueError("need 0 <= a < b")
    return IntervalDistribution("uniform", (float(a), float(b)))


# -- weight functionals (tilts) ---------------------------------------------


@dataclass(frozen=True)
class Tilt:
    """Nonnegative weight functional of the straddling gaps.

    Registered families read only the gaps around the origin, so their
    value is constant while the origin moves inside the straddling
    interval; that property is what identity checks on the re-centered
    law rely on.
    """

    name: str
    params: tuple[float, ...]

    def value_batch(self, batch: PatternBatch) -> np.ndarray:
        pos0 = batch.straddle_positions()
        if np.any(pos0 < 0):
            raise InsufficientContext("tilt evaluation needs origin-straddling patterns")
        pts = batch.points
        if self.name == "identity":
            return np.ones(batch.n)
        a0 = pts[pos0 + 1] - pts[pos0]
        if self.name == "alpha0":
            return self.params[0] * a0
        if self.name == "alpha01":
            if np.any(pos0 + 2 >= batch.offsets[1:]):
                raise InsufficientContext("tilt needs the gap after the straddling one")
            a1 = pts[pos0 + 2] - pts[pos0 + 1]
            g0, g1 = self.params
            return g0 * a0 + g1 * a1
        raise UnknownTilt(self.name)

    def value(self, p: PointPattern) -> float:
        if self.name == "identity":
            return 1.0
        if self.name == "alpha0":
            return self.params[0] * p.interval(0)
        if self.name == "alpha01":
            g0, g1 = self.params
            return g0 * p.interval(0) + g1 * p.interval(1)
        raise UnknownTilt(self.name)

    @property
    def label(self) -> str:
        inner = ",".join(repr(p) for p in self.params)
        return f"{self.name}({inner})"


def make_tilt(name: str, *params: float) -> Tilt:
    if name == "identity":
        return Tilt("identity", ())
    if name == "alpha0":
        (c,) = params
        if not c > 0:
            raise UnknownTilt("alpha0 tilt needs c > 0")
        return Tilt("alpha0", (float(c),))
    if name == "alpha01":
        g0, g1 = params
        if g0 < 0 or g1 < 0 or (g0 == 0 and g1 == 0):
            raise UnknownTilt("alpha01 tilt needs nonnegative weights, not both zero")
        return Tilt("alpha01", (float(g0), float(g1)))
    raise UnknownTilt(name)


@dataclass(frozen=True)
class TiltInfo:
    """How a law relates to a time-stationary base: weight functional,
    base intensity, and a sampler of the base's event-centered law."""

    tilt: Tilt
    base_rate: float
    base_palm: Callable[[], "ProcessModel"]


# -- core model type ---------------------------------------------------------


@dataclass(frozen=True)
class WeightedPattern:
    pattern: PointPattern
    weight: float

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError("importance weight must be nonnegative")


class ProcessModel:
    """A named law with a batch sampler and metadata used by estimators."""

    def __init__(
        self,
        law_tag: str,
        descriptor: dict,
        scale: float,
        batch_fn: Callable[[np.random.Generator, tuple[float, float], int], PatternBatch],
        *,
        weighted: bool = False,
        exact_rate: float | None = None,
        interval: IntervalDistribution | None = None,
        tilt_info: TiltInfo | None = None,
        palm_factory: Callable[[], "ProcessModel"] | None = None,
    ):
        self.law_tag = law_tag
        self.descriptor = dict(descriptor)
        self.scale = float(scale)
        self.weighted = weighted
        self.exact_rate = exact_rate
        self.interval = interval
        self.tilt_info = tilt_info
        self._batch_fn = batch_fn
        self._palm_factory = palm_factory

    @property
    def is_ts(self) -> bool:
        return self.law_tag == LAW_TS

    @property
    def is_es(self) -> bool:
        return self.law_tag == LAW_ES

    @property
    def is_deterministic(self) -> bool:
        return self.law_tag == LAW_DETERMINISTIC

    def sample_batch(self, rng, window, n: int) -> PatternBatch:
        return self._batch_fn(rng, window, n)

    def sample(self, rng, window) -> WeightedPattern:
        batch = self.sample_batch(rng, window, 1)
        return WeightedPattern(batch.pattern(0), float(batch.weights[0]))

    def palm_companion(self) -> "ProcessModel | None":
        """The event-stationary law standing to this one as its Palm version."""
        return self._palm_factory() if self._palm_factory is not None else None

    @property
    def label(self) -> str:
        name = self.descriptor.get("model", self.law_tag)
        rest = ",".join(
            f"{k}={v}" for k, v in sorted(self.descriptor.items()) if k != "model"
        )
        return f"{name}({rest})"

    def __repr__(self):
        return f"<ProcessModel {self.label} [{self.law_tag}]>"


# -- batch assembly helpers ---------------------------------------------------


def _splice_rows(batch: PatternBatch, bad: np.ndarray, redraw_row) -> PatternBatch:
    """Replace the flagged rows using the (rare) per-row redraw callable."""
    rows = np.split(batch.points, batch.offsets[1:-1])
    windows = batch.windows.copy()
    for i in np.flatnonzero(bad):
        rows[i] = redraw_row(i)
    counts = np.fromiter((r.size for r in rows), dtype=np.int64, count=len(rows))
    offsets = np.concatenate(([0], np.cumsum(counts)))
    return PatternBatch(np.concatenate(rows), offsets, windows, batch.weights)


def _row_flaws(batch: PatternBatch, require_straddle: bool) -> np.ndarray:
    """Rows that are empty, violate the minimum gap, or fail to straddle 0."""
    sizes = np.diff(batch.offsets)
    bad = sizes == 0
    if batch.points.size:
        gaps_ok = np.ones(batch.n, dtype=bool)
        d = np.diff(batch.points)
        if d.size:
            # ignore differences that cross replication boundaries
            boundary = np.zeros(d.size, dtype=bool)
            inner = batch.offsets[1:-1]
            inner = inner[(inner > 0) & (inner <= d.size)]
            boundary[inner - 1] = True
            tiny = (d <= MIN_GAP) & ~boundary
            if tiny.any():
                rep_of_gap = np.searchsorted(batch.offsets[1:], np.flatnonzero(tiny), side="right")
                gaps_ok[rep_of_gap] = False
        bad |= ~gaps_ok
    if require_straddle:
        bad |= batch.straddle_positions() < 0
    return bad


def _side_cumsum(rng, dist: IntervalDistribution, n_rows: int, span: float) -> np.ndarray:
    """Per-row cumulative gap sums guaranteed to exceed span."""
    per = max(span, 0.0) / dist.mean
    m = int(per + 10.0 * math.sqrt(per + 1.0) + 10.0)
    while True:
        cum = np.cumsum(dist.sample(rng, (n_rows, m)), axis=1)
        if np.all(cum[:, -1] > span):
            return cum
        m *= 2


def _assemble_two_sided(
    rng,
    window,
    n: int,
    anchors: np.ndarray,
    left_dist: IntervalDistribution,
    right_dist: IntervalDistribution,
) -> PatternBatch:
    """Anchor columns (ascending per row) plus i.i.d. gaps extending to both
    window edges; events outside the window are discarded."""
    lo, hi = window
    left = _side_cumsum(rng, left_dist, n, float(np.max(anchors[:, 0]) - lo))
    right = _side_cumsum(rng, right_dist, n, float(hi - np.min(anchors[:, -1])))
    matrix = np.hstack((anchors[:, :1] - left[:, ::-1], anchors, anchors[:, -1:] + right))
    valid = (matrix >= lo) & (matrix <= hi)
    counts = valid.sum(axis=1)
    offsets = np.concatenate(([0], np.cumsum(counts, dtype=np.int64)))
    windows = np.tile(np.array(window, dtype=np.float64), (n, 1))
    return PatternBatch(matrix[valid], offsets, windows, np.ones(n))


def _check_window(window) -> tuple[float, float]:
    lo, hi = float(window[0]), float(window[1])
    if not (lo < 0.0 < hi):
        raise InsufficientWindow(f"window must contain the origin, got ({lo}, {hi})")
    return lo, hi


# -- model factories ----------------------------------------------------------


def poisson_ts(rate: float) -> ProcessModel:
    """Time-stationary homogeneous Poisson law, conditioned (by redraw) on
    straddling the origin."""
    if not rate > 0:
        raise ValueError("need rate > 0")

    def batch(rng, window, n):
        lo, hi = _check_window(window)
        width = hi - lo
        if width < 4.0 / rate:
            raise DegenerateWindow(f"window of length {width} too short for rate {rate}")

        def draw_rows(k: int):
            counts = rng.poisson(rate * width, k)
            total = int(counts.sum())
            vals = lo + width * rng.random(total)
            rep_of = np.repeat(np.arange(k), counts)
            order = np.lexsort((vals, rep_of))
            pts = vals[order]
            offsets = np.concatenate(([0], np.cumsum(counts, dtype=np.int64)))
            return pts, offsets

        pts, offsets = draw_rows(n)
        windows = np.tile(np.array(window, dtype=np.float64), (n, 1))
        out = PatternBatch(pts, offsets, windows, np.ones(n))
        bad = _row_flaws(out, require_straddle=True)
        while bad.any():
            def redraw(_i):
                while True:
                    row_pts, _ = draw_rows(1)
                    if row_pts.size >= 2 and row_pts[0] <= 0.0 < row_pts[-1]:
                        if np.all(np.diff(row_pts) > MIN_GAP):
                            return row_pts
            out = _splice_rows(out, bad, redraw)
            bad = _row_flaws(out, require_straddle=True)
        return out

    return ProcessModel(
        LAW_TS,
        {"model": "poisson_ts", "rate": rate},
        1.0 / rate,
        batch,
        exact_rate=rate,
        interval=exponential(rate),
        palm_factory=lambda: renewal_es(exponential(rate)),
    )


def renewal_es(d: IntervalDistribution) -> ProcessModel:
    """Event-stationary renewal law: an event at exactly 0 and i.i.d. gaps
    extended independently to both window edges."""

    def batch(rng, window, n):
        _check_window(window)
        anchors = np.zeros((n, 1))
        return _assemble_two_sided(rng, window, n, anchors, d, d)

    return ProcessModel(
        LAW_ES,
        {"model": "renewal_es", "interval": d.label},
        d.mean,
        batch,
        interval=d,
    )


def renewal_ts_from_es(d: IntervalDistribution) -> ProcessModel:
    """Time-stationary renewal law built by inversion: the origin-straddling
    gap is drawn length-biased, the origin lands uniformly inside it, and
    i.i.d. gaps extend outward on both sides."""
    mean = d.mean
    if not (math.isfinite(mean) and mean > 0):
        raise NoMean("interval distribution must have a finite positive mean")

    def batch(rng, window, n):
        _check_window(window)
        length = d.sample_length_biased(rng, n)
        u = rng.random(n)
        t0 = -u * length
        anchors = np.column_stack((t0, t0 + length))
        out = _assemble_two_sided(rng, window, n, anchors, d, d)
        bad = _row_flaws(out, require_straddle=False)
        while bad.any():
            def redraw(_i):
                while True:
                    ell = float(d.sample_length_biased(rng, 1)[0])
                    row_t0 = -float(rng.random(1)[0]) * ell
                    sub = _assemble_two_sided(
                        rng, window, 1, np.array([[row_t0, row_t0 + ell]]), d, d
                    )
                    row = sub.points
                    if row.size and np.all(np.diff(row) > MIN_GAP):
                        return row
            out = _splice_rows(out, bad, redraw)
            bad = _row_flaws(out, require_straddle=False)
        return out

    return ProcessModel(
        LAW_TS,
        {"model": "renewal_ts", "interval": d.label},
        mean,
        batch,
        exact_rate=1.0 / mean,
        interval=d,
        palm_factory=lambda: renewal_es(d),
    )


def tilted_ts(base: ProcessModel, tilt: Tilt) -> ProcessModel:
    """Importance sampler for the law obtained by reweighting a TS base with
    the given functional; estimators self-normalize the weights."""
    if not base.is_ts:
        raise ValueError("tilted_ts needs a time-stationary base model")
    if base.exact_rate is None:
        raise ValueError("tilted_ts needs a base with known intensity")
    base_rate = base.exact_rate

    def batch(rng, window, n):
        out = base.sample_batch(rng, window, n)
        w = out.weights * tilt.value_batch(out)
        return PatternBatch(out.points, out.offsets, out.windows, w)

    return ProcessModel(
        LAW_TILTED_TS,
        dict(base.descriptor, model="tilted_ts", base=base.descriptor["model"], tilt=tilt.label),
        base.scale,
        batch,
        weighted=True,
        tilt_info=TiltInfo(tilt, base_rate, lambda: base.palm_companion()),
    )


def example84_exact(rate: float) -> ProcessModel:
    """Exact unweighted sampler of the gap-reweighted Poisson law: the
    origin-straddling gap has a Gamma(3, rate) length with the origin
    uniform inside it, and plain exponential gaps extend outward."""
    if not rate > 0:
        raise ValueError("need rate > 0")
    expd = exponential(rate)

    def batch(rng, window, n):
        _check_window(window)
        length = rng.gamma(3.0, 1.0 / rate, n)
        u = rng.random(n)
        t0 = -u * length
        anchors = np.column_stack((t0, t0 + length))
        out = _assemble_two_sided(rng, window, n, anchors, expd, expd)
        bad = _row_flaws(out, require_straddle=False)
        while bad.any():
            def redraw(_i):
                while True:
                    ell = float(rng.gamma(3.0, 1.0 / rate))
                    row_t0 = -float(rng.random(1)[0]) * ell
                    sub = _assemble_two_sided(
                        rng, window, 1, np.array([[row_t0, row_t0 + ell]]), expd, expd
                    )
                    if sub.points.size and np.all(np.diff(sub.points) > MIN_GAP):
                        return sub.points
            out = _splice_rows(out, bad, redraw)
            bad = _row_flaws(out, require_straddle=False)
        return out

    return ProcessModel(
        LAW_TILTED_TS,
        {"model": "example84", "rate": rate},
        1.0 / rate,
        batch,
        tilt_info=TiltInfo(
            make_tilt("alpha0", rate / 2.0), rate, lambda: renewal_es(exponential(rate))
        ),
    )


# -- the non-AMS lattice construction ----------------------------------------


def example44_run_lengths(k_max: int) -> list[int]:
    """Block lengths a(1..k_max): a(k) repeats the previous value at even k
    and jumps to the running total at odd k."""
    a = [4]
    for k in range(2, k_max + 1):
        a.append(a[-1] if k % 2 == 0 else sum(a))
    return a


def example44_block_ends(k_max: int) -> list[int]:
    """Cumulative block ends b(1..k_max)."""
    out = []
    total = 0
    for ak in example44_run_lengths(k_max):
        total += ak
        out.append(total)
    return out


def example44_labels(n: int) -> np.ndarray:
    """The 0/1 label sequence x_1..x_n: blocks alternate 1-runs and 0-runs
    with the run lengths above."""
    out = np.empty(n, dtype=np.int8)
    pos = 0
    k = 0
    a = [4]
    while pos < n:
        run = min(a[-1], n - pos)
        out[pos:pos + run] = 1 if k % 2 == 0 else 0
        pos += run
        k += 1
        a.append(a[-1] if (k + 1) % 2 == 0 else sum(a))
    return out


def example44_cesaro_exact(n: int) -> Fraction:
    """Exact running average of the labels, as a rational."""
    labels = example44_labels(n)
    return Fraction(int(labels.sum()), n)


def example44(pattern_len: int) -> ProcessModel:
    """Deterministic realization of the non-AMS label sequence: unit gaps at
    and left of the origin, and gap i equal to 1 where x_i = 1 and 2 where
    x_i = 0, so the indicator of [alpha_0 = 1] seen from event i is x_i."""
    if pattern_len < 1:
        raise ValueError("need pattern_len >= 1")
    labels = example44_labels(pattern_len)
    gaps = 2.0 - labels.astype(np.float64)
    right = np.concatenate(([1.0], 1.0 + np.cumsum(gaps)))  # T_1 .. T_{len+1}

    def batch(rng, window, n):
        lo, hi = _check_window(window)
        if hi > right[-1]:
            raise InsufficientWindow(
                f"window reaches {hi} but the realization stops at {right[-1]}; "
                f"increase pattern_len"
            )
        left = -np.arange(0.0, -lo + 1.0)  # 0, -1, -2, ...
        left = left[left >= lo][::-1]
        pts = np.concatenate((left, right[right <= hi]))
        counts = np.full(n, pts.size, dtype=np.int64)
        offsets = np.concatenate(([0], np.cumsum(counts)))
        windows = np.tile(np.array((lo, hi), dtype=np.float64), (n, 1))
        return PatternBatch(np.tile(pts, n), offsets, windows, np.ones(n))

    return ProcessModel(
        LAW_DETERMINISTIC,
        {"model": "example44", "pattern_len": pattern_len},
        1.5,
        batch,
    )


def example44_natural_window(pattern_len: int) -> tuple[float, float]:
    labels = example44_labels(pattern_len)
    extent = 1.0 + float(np.sum(2.0 - labels))
    return (-2.5, extent + 0.5)


# -- config round trip --------------------------------------------------------


def _interval_to_config(d: IntervalDistribution) -> dict:
    cfg = {"interval": d.family}
    if d.family == "exponential":
        cfg["rate"] = d.params[0]
    elif d.family == "gamma":
        cfg["shape"], cfg["rate"] = d.params
    elif d.family == "deterministic":
        cfg["value"] = d.params[0]
    else:
        cfg["lo"], cfg["hi"] = d.params
    return cfg


def _interval_from_config(cfg) -> IntervalDistribution:
    family = cfg["interval"]
    if family == "exponential":
        return exponential(float(cfg["rate"]))
    if family == "gamma":
        return gamma_intervals(float(cfg["shape"]), float(cfg["rate"]))
    if family == "deterministic":
        return deterministic(float(cfg["value"]))
    if family == "uniform":
        return uniform_intervals(float(cfg["lo"]), float(cfg["hi"]))
    raise ValueError(f"unknown interval family {family!r}")


def model_to_config(model: ProcessModel) -> dict:
    """Flat key-value descriptor with stable field names."""
    name = model.descriptor["model"]
    cfg = {"model": name}
    if name == "poisson_ts":
        cfg["rate"] = model.exact_rate
    elif name in ("renewal_es", "renewal_ts"):
        cfg.update(_interval_to_config(model.interval))
    elif name == "example84":
        cfg["rate"] = model.descriptor["rate"]
    elif name == "example44":
        cfg["pattern_len"] = model.descriptor["pattern_len"]
    elif name == "tilted_ts":
        cfg["base"] = model.descriptor["base"]
        cfg["rate"] = model.descriptor["rate"]
        tilt = model.tilt_info.tilt
        cfg["tilt"] = tilt.name
        for i, p in enumerate(tilt.params):
            cfg[f"tilt_p{i}"] = p
    else:
        raise ValueError(f"cannot serialize model {name!r}")
    return cfg


def model_from_config(cfg) -> ProcessModel:
    name = cfg.get("model")
    if name == "poisson_ts":
        return poisson_ts(float(cfg["rate"]))
    if name == "renewal_es":
        return renewal_es(_interval_from_config(cfg))
    if name == "renewal_ts":
        return renewal_ts_from_es(_interval_from_config(cfg))
    if name == "example84":
        return example84_exact(float(cfg["rate"]))
    if name == "example44":
        return example44(int(cfg["pattern_len"]))
    if name == "tilted_ts":
        base_name = cfg.get("base", "poisson_ts")
        if base_name != "poisson_ts":
            raise ValueError("tilted_ts config supports poisson_ts bases")
        base = poisson_ts(float(cfg["rate"]))
        tilt_params = []
        i = 0
        while f"tilt_p{i}" in cfg:
            tilt_params.append(float(cfg[f"tilt_p{i}"]))
            i += 1
        return tilted_ts(base, make_tilt(cfg["tilt"], *tilt_params))
    raise ValueError(f"unknown model {name!r}")
