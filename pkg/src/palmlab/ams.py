"""Cesaro-average diagnostics and stationary-limit conversions.

Event traces average the indicator of an eventuality seen from events
1..n; time traces average it seen from positions y in (0, x], with the
inner integral computed exactly from the piecewise-constant segment form
(no discretization).  A verdict rule on the trace tail classifies runs as
Convergent, NotConvergent, or Inconclusive; convergence can never be
proven from finite data, so the rule is an explicit heuristic with an
honest third outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoMean, TooFewCheckpoints
from .estimate import (
    Estimate,
    guard_window,
    ratio_estimate,
    run_kernel,
    straddle_gaps,
)
from .events import Eventuality, effective_radius
from .models import ProcessModel, example44_block_ends, example44_labels

DEFAULT_HORIZON_GAPS = 50.0


@dataclass(frozen=True)
class CesaroTrace:
    """Running averages at geometric checkpoints, each with a Monte Carlo s.e."""

    checkpoints: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray
    kind: str  # "event" | "time"
    reps: int
    rejected: int


@dataclass(frozen=True)
class AmsVerdict:
    status: str  # "Convergent" | "NotConvergent" | "Inconclusive"
    oscillation: float
    threshold: float
    tail_fraction: float
    limit: float | None = None
    limit_se: float | None = None


def _geometric(first: float, last: float) -> list[float]:
    out = []
    c = first
    while c < last:
        out.append(c)
        c *= 2.0
    out.append(last)
    return out


def _is_example44(model: ProcessModel) -> bool:
    return model.descriptor.get("model") == "example44"


def _event_checkpoints(model: ProcessModel, n_max: int) -> np.ndarray:
    cps = set(int(c) for c in _geometric(8.0, float(n_max)) if c <= n_max)
    cps.add(n_max)
    if _is_example44(model):
        # the divergent subsequences live exactly at the block ends
        for b in example44_block_ends(32):
            if b <= n_max:
                cps.add(b)
    return np.array(sorted(c for c in cps if c >= 1), dtype=np.int64)


def _time_checkpoints(model: ProcessModel, x_max: float) -> np.ndarray:
    cps = set(_geometric(8.0 * model.scale, float(x_max)))
    if _is_example44(model):
        n = model.descriptor["pattern_len"]
        labels = example44_labels(n)
        times = 1.0 + np.concatenate(([0.0], np.cumsum(2.0 - labels[:-1])))
        for b in example44_block_ends(32):
            if b <= n and times[b - 1] <= x_max:
                cps.add(float(times[b - 1]))
    return np.array(sorted(c for c in cps if c <= x_max), dtype=np.float64)


def cesaro_event(
    model: ProcessModel,
    A: Eventuality,
    n_max: int,
    budget: int,
    *,
    seed: int = 0,
    stream="cesaro_event",
    horizon_gaps: float = DEFAULT_HORIZON_GAPS,
    threads: int = 1,
) -> CesaroTrace:
    """Running average of the indicator of A seen from events 1..n."""
    if n_max < 1:
        raise ValueError("need n_max >= 1")
    if model.is_deterministic:
        budget = 1
    cps = _event_checkpoints(model, n_max)
    ncp = cps.size
    r = effective_radius(A, model.scale, horizon_gaps)
    if model.is_deterministic:
        reach = 2.0 * model.scale * n_max + 10.0 * model.scale
    else:
        reach = model.scale * (n_max + 10.0 * math.sqrt(n_max) + 10.0)
    window = guard_window(model, r, 0.0, reach)

    def kernel(batch, ctx):
        pos0 = ctx.pos0()
        # events 1..n_max all sit strictly right of T_0
        good = pos0 + n_max < ctx.off_hi
        rows = np.flatnonzero(good)
        cols = np.zeros((batch.n, ncp + 1))
        cols[:, ncp] = 1.0
        reject = ~good
        if rows.size:
            e = (pos0[rows, None] + 1 + np.arange(n_max)[None, :]).ravel()
            rep = np.repeat(rows, n_max)
            codes = A.at_events(ctx, e, rep).reshape(rows.size, n_max)
            bad = (codes == -1).any(axis=1)
            reject[rows[bad]] = True
            running = np.cumsum(codes, axis=1, dtype=np.float64)[:, cps - 1] / cps
            cols[rows, :ncp] = running
        return cols, reject

    sums = run_kernel(model, window, budget, ncp + 1, kernel,
                      seed=seed, stream=stream, threads=threads)
    values = np.empty(ncp)
    errors = np.empty(ncp)
    for j in range(ncp):
        est = ratio_estimate(sums, j, ncp)
        values[j] = est.value
        errors[j] = est.std_error
    return CesaroTrace(cps.astype(np.float64), values, errors, "event",
                       budget, int(sums.rejected.sum()))


def cesaro_time(
    model: ProcessModel,
    A: Eventuality,
    x_max: float,
    budget: int,
    *,
    seed: int = 0,
    stream="cesaro_time",
    horizon_gaps: float = DEFAULT_HORIZON_GAPS,
    threads: int = 1,
) -> CesaroTrace:
    """Running time-average of the indicator of A seen from positions in (0, x];
    the integrand is integrated exactly between its breakpoints."""
    if not x_max > 0:
        raise ValueError("need x_max > 0")
    if model.is_deterministic:
        budget = 1
    cps = _time_checkpoints(model, x_max)
    ncp = cps.size
    r = effective_radius(A, model.scale, horizon_gaps)
    window = guard_window(model, r, 0.0, x_max)

    def kernel(batch, ctx):
        cols = np.zeros((batch.n, ncp + 1))
        cols[:, ncp] = 1.0
        reject = np.zeros(batch.n, dtype=bool)
        for i in range(batch.n):
            p = batch.pattern(i)
            edges, vals = A.segments(p, 0.0, x_max)
            widths = np.diff(edges)
            if np.any((vals == -1) & (widths > 0)):
                reject[i] = True
                continue
            cum = np.concatenate(([0.0], np.cumsum(vals * widths)))
            cols[i, :ncp] = np.interp(cps, edges, cum) / cps
        return cols, reject

    sums = run_kernel(model, window, budget, ncp + 1, kernel,
                      seed=seed, stream=stream, threads=threads)
    values = np.empty(ncp)
    errors = np.empty(ncp)
    for j in range(ncp):
        est = ratio_estimate(sums, j, ncp)
        values[j] = est.value
        errors[j] = est.std_error
    return CesaroTrace(cps, values, errors, "time", budget, int(sums.rejected.sum()))


def ams_verdict(trace: CesaroTrace, tail_fraction: float = 0.5,
                tol: float = 0.05) -> AmsVerdict:
    """Classify the tail of a trace.

    NotConvergent needs the tail oscillation to exceed both the tolerance
    and 3x its own standard error; Convergent needs oscillation and noise
    both below the tolerance; anything else is Inconclusive.
    """
    ncp = trace.checkpoints.size
    if ncp < 6:
        raise TooFewCheckpoints(f"verdict needs >= 6 checkpoints, trace has {ncp}")
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must be in (0, 1]")
    k = max(2, int(math.ceil(tail_fraction * ncp)))
    vals = trace.values[-k:]
    errs = trace.std_errors[-k:]
    i_hi = int(np.argmax(vals))
    i_lo = int(np.argmin(vals))
    osc = float(vals[i_hi] - vals[i_lo])
    noise = 3.0 * math.hypot(float(errs[i_hi]), float(errs[i_lo]))
    threshold = max(tol, noise)
    if osc > threshold:
        return AmsVerdict("NotConvergent", osc, threshold, tail_fraction)
    if osc <= tol and noise <= tol:
        return AmsVerdict("Convergent", osc, threshold, tail_fraction,
                          limit=float(trace.values[-1]),
                          limit_se=float(trace.std_errors[-1]))
    return AmsVerdict("Inconclusive", osc, threshold, tail_fraction)


# -- stationary-limit conversions (ergodic models) -----------------------------


def convert_es_to_ts(
    es_model: ProcessModel,
    A: Eventuality,
    budget: int,
    *,
    seed: int = 0,
    stream="es_to_ts",
    horizon_gaps: float = DEFAULT_HORIZON_GAPS,
    threads: int = 1,
) -> Estimate:
    """Time-stationary probability from an event-stationary (ergodic) model:
    the exact integral of the indicator over the first gap, normalized by
    the plug-in mean gap."""
    if not es_model.is_es:
        raise ValueError("convert_es_to_ts needs an event-stationary model")
    mean = es_model.interval.mean if es_model.interval is not None else None
    if mean is None or not (math.isfinite(mean) and mean > 0):
        raise NoMean("the event-stationary model needs a finite positive mean gap")
    r = effective_radius(A, es_model.scale, horizon_gaps)
    reach = horizon_gaps * es_model.scale
    window = guard_window(es_model, r, 0.0, reach)
    hi_w = window[1]

    def kernel(batch, ctx):
        cols = np.zeros((batch.n, 2))
        reject = np.zeros(batch.n, dtype=bool)
        for i in range(batch.n):
            p = batch.pattern(i)
            try:
                a0 = p.t(1)
            except Exception:
                reject[i] = True
                continue
            if a0 + r > hi_w:
                reject[i] = True
                continue
            edges, vals = A.segments(p, 0.0, a0)
            widths = np.diff(edges)
            if np.any((vals == -1) & (widths > 0)):
                reject[i] = True
                continue
            cols[i, 0] = float(np.sum(vals * widths))
            cols[i, 1] = a0
        return cols, reject

    sums = run_kernel(es_model, window, budget, 2, kernel,
                      seed=seed, stream=stream, threads=threads)
    return ratio_estimate(sums, 0, 1)


def convert_ts_to_es(
    ts_model: ProcessModel,
    A: Eventuality,
    budget: int,
    *,
    seed: int = 0,
    stream="ts_to_es",
    horizon_gaps: float = DEFAULT_HORIZON_GAPS,
    threads: int = 1,
) -> Estimate:
    """Event-stationary probability from a time-stationary (ergodic) model:
    the gap-weighted indicator at the straddling event, normalized by the
    plug-in count rate."""
    if not ts_model.is_ts:
        raise ValueError("convert_ts_to_es needs a time-stationary model")
    span = 10.0 * ts_model.scale
    r = effective_radius(A, ts_model.scale, horizon_gaps)
    window = guard_window(ts_model, r, 0.0, span)

    def kernel(batch, ctx):
        pos0, a0, ok = straddle_gaps(batch, ctx)
        codes = A.at_events(ctx, np.clip(pos0, 0, None), np.arange(batch.n))
        reject = ~ok | (codes == -1)
        num = np.where(reject, 0.0, (codes == 1) / a0)
        gs, shifts = ctx.gsorted()
        counts = (np.searchsorted(gs, shifts + span, side="right")
                  - np.searchsorted(gs, shifts, side="right"))
        den = counts / span
        return np.column_stack((num, den)), reject

    sums = run_kernel(ts_model, window, budget, 2, kernel,
                      seed=seed, stream=stream, threads=threads)
    return ratio_estimate(sums, 0, 1)
