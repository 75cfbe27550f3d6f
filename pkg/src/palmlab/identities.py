"""Registry of distributional identities checked by paired Monte Carlo runs.

Each entry evaluates a left and a right side with independent seed
streams and passes when |lhs - rhs| <= z_crit * combined s.e. + atol.
Entries may probe several parameter values; the report carries the worst
probe.  z_crit = 4 with atol = 0.002 keeps the family-wise false-failure
rate of the ~30 simultaneous checks well under 1%.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .ams import convert_es_to_ts, convert_ts_to_es
from .errors import NotApplicable
from .estimate import (
    Estimate,
    est_event_probability,
    est_intensity,
    est_intermediate,
    est_palm_zero,
    est_shifted_palm,
    guard_window,
    mc_mean,
    pstar_model,
    straddle_gaps,
    _events_in,
)
from .events import (
    Eventuality,
    SUITE_BATTERY,
    _kleene_and,
    effective_radius,
    ev_straddle,
    parse_eventuality,
)
from .models import (
    ProcessModel,
    example84_exact,
    gamma_intervals,
    poisson_ts,
    renewal_es,
    renewal_ts_from_es,
)

Z_CRIT = 4.0
ATOL = 0.002


@dataclass(frozen=True)
class RunParams:
    budget: int = 100_000
    seed: int = 2026
    horizon_gaps: float = 15.0
    threads: int = 1


@dataclass(frozen=True)
class IdentitySpec:
    id: str
    description: str
    needs_eventuality: bool
    applies: Callable[[ProcessModel], bool]
    run: Callable[[ProcessModel, Eventuality | None, RunParams], list]
    atol: float = ATOL
    budget_factor: float = 1.0


@dataclass(frozen=True)
class IdentityReport:
    id: str
    model: str
    eventuality: str
    probe: str
    lhs: Estimate
    rhs: Estimate
    z: float
    verdict: str  # "pass" | "fail"
    budget: int


# -- small estimate arithmetic -------------------------------------------------


def _exact(value: float) -> Estimate:
    return Estimate(float(value), 0.0, 0, 0, 0.0)


def _scaled(est: Estimate, factor: float) -> Estimate:
    return Estimate(est.value * factor, est.std_error * abs(factor),
                    est.reps, est.rejected, est.ess)


def _inverted(est: Estimate) -> Estimate:
    v = est.value
    return Estimate(1.0 / v, est.std_error / (v * v), est.reps, est.rejected, est.ess)


def _indep_ratio(num: Estimate, den: Estimate) -> Estimate:
    v = num.value / den.value
    rel = math.hypot(
        num.std_error / num.value if num.value else 0.0,
        den.std_error / den.value if den.value else 0.0,
    )
    return Estimate(v, abs(v) * rel, num.reps, num.rejected + den.rejected,
                    min(num.ess, den.ess) if num.ess and den.ess else 0.0)


def combined_se(a: Estimate, b: Estimate) -> float:
    return math.hypot(a.std_error, b.std_error)


# -- shared kernels -------------------------------------------------------------


def _count_rate(model: ProcessModel, rp: RunParams, stream: str) -> Estimate:
    """Mean occurrence count per unit time on (0, span]."""
    span = 10.0 * model.scale
    window = guard_window(model, model.scale, 0.0, span)

    def kernel(batch, ctx):
        gs, shifts = ctx.gsorted()
        cnt = (np.searchsorted(gs, shifts + span, side="right")
               - np.searchsorted(gs, shifts, side="right"))
        return cnt / span, np.zeros(batch.n, dtype=bool)

    return mc_mean(model, window, kernel, rp.budget,
                   seed=rp.seed, stream=stream, threads=rp.threads)


def _mean_alpha0(model: ProcessModel, rp: RunParams, stream: str) -> Estimate:
    window = guard_window(model, model.scale * rp.horizon_gaps)

    def kernel(batch, ctx):
        _, a0, ok = straddle_gaps(batch, ctx)
        return np.where(ok, a0, 0.0), ~ok

    return mc_mean(model, window, kernel, rp.budget,
                   seed=rp.seed, stream=stream, threads=rp.threads)


def _gap_at(ctx, y: float):
    """Per replication: array index and validity of the gap containing y
    (an event exactly at y owns its right gap)."""
    gs, shifts = ctx.gsorted()
    idx = np.searchsorted(gs, y + shifts, side="right") - 1
    valid = (idx >= ctx.off_lo) & (idx + 1 < ctx.off_hi)
    return np.clip(idx, 0, max(ctx.points.size - 2, 0)), valid


def _tilt_shifted_value(model: ProcessModel, ctx, y: float):
    """sigma applied to the view from position y, per replication."""
    tilt = model.tilt_info.tilt
    idx, valid = _gap_at(ctx, y)
    pts = ctx.points
    g0 = pts[idx + 1] - pts[idx]
    if tilt.name == "alpha0":
        return tilt.params[0] * g0, valid
    if tilt.name == "alpha01":
        valid = valid & (idx + 2 < ctx.off_hi)
        nxt = np.clip(idx + 2, 0, max(pts.size - 1, 0))
        g1 = pts[nxt] - pts[np.minimum(idx + 1, nxt)]
        c0, c1 = tilt.params
        return c0 * g0 + c1 * g1, valid
    if tilt.name == "identity":
        return np.ones(ctx.batch.n), valid
    raise NotApplicable(f"tilt {tilt.name!r} has no shifted-value form")


def _segment_integral(A: Eventuality, p, y_lo: float, y_hi: float):
    """Exact integral of the indicator over (y_lo, y_hi]; None if indeterminate."""
    if y_hi <= y_lo:
        return 0.0
    edges, vals = A.segments(p, y_lo, y_hi)
    widths = np.diff(edges)
    if np.any((vals == -1) & (widths > 0)):
        return None
    return float(np.sum(vals * widths))


# -- identity runners ------------------------------------------------------------


def _run_i23(model, A, rp):
    lhs = _count_rate(model, rp, "I-2.3:L")
    window = guard_window(model, model.scale * rp.horizon_gaps)

    def kernel(batch, ctx):
        _, a0, ok = straddle_gaps(batch, ctx)
        return np.where(ok, 1.0 / a0, 0.0), ~ok

    rhs = mc_mean(model, window, kernel, rp.budget,
                  seed=rp.seed, stream="I-2.3:R", threads=rp.threads)
    return [("rate vs E(1/alpha0)", lhs, rhs)]


def _run_i24(model, A, rp):
    x1, x2 = 5.0 * model.scale, 20.0 * model.scale
    lhs = est_palm_zero(model, A, x1, rp.budget, seed=rp.seed, stream="I-2.4:L",
                        horizon_gaps=rp.horizon_gaps, threads=rp.threads)
    rhs = est_palm_zero(model, A, x2, rp.budget, seed=rp.seed, stream="I-2.4:R",
                        horizon_gaps=rp.horizon_gaps, threads=rp.threads)
    return [(f"x={x1:g} vs x={x2:g}", lhs, rhs)]


def _run_i26(model, A, rp):
    palm = model.palm_companion()
    lam = model.exact_rate
    r = effective_radius(A, model.scale, rp.horizon_gaps)
    pad = rp.horizon_gaps * model.scale
    window = guard_window(palm, r + pad)
    out = []
    for k in (0, 1):
        lhs = est_event_probability(model, A, rp.budget, seed=rp.seed,
                                    stream=f"I-2.6:k{k}:L",
                                    horizon_gaps=rp.horizon_gaps, threads=rp.threads)

        def kernel(batch, ctx, k=k):
            vals = np.zeros(batch.n)
            reject = np.zeros(batch.n, dtype=bool)
            for i in range(batch.n):
                p = batch.pattern(i)
                try:
                    y_lo, y_hi = p.t(-k), p.t(-k + 1)
                except Exception:
                    reject[i] = True
                    continue
                if y_lo < -pad or y_hi > pad:
                    reject[i] = True
                    continue
                integral = _segment_integral(A, p, y_lo, y_hi)
                if integral is None:
                    reject[i] = True
                else:
                    vals[i] = integral
            return vals, reject

        rhs = _scaled(
            mc_mean(palm, window, kernel, rp.budget,
                    seed=rp.seed, stream=f"I-2.6:k{k}:R", threads=rp.threads),
            lam,
        )
        out.append((f"k={k}", lhs, rhs))
    return out


def _run_i27a(model, A, rp):
    palm = model.palm_companion()
    lam = model.exact_rate
    r = effective_radius(A, model.scale, rp.horizon_gaps)
    out = []
    for n in (0, 1):
        lhs = est_intermediate(model, n, A, rp.budget, seed=rp.seed,
                               stream=f"I-2.7a:n{n}:L",
                               horizon_gaps=rp.horizon_gaps, threads=rp.threads)
        window = guard_window(palm, r + (abs(n) + 2) * palm.scale * 4.0)

        def kernel(batch, ctx, n=n):
            i = ctx.pos0() - n
            ok = (i >= ctx.off_lo) & (i + 1 < ctx.off_hi)
            ic = np.clip(i, 0, max(batch.points.size - 2, 0))
            gap = batch.points[ic + 1] - batch.points[ic]
            codes = A.at_origin(ctx)
            reject = ~ok | (codes == -1)
            return np.where(~reject & (codes == 1), gap, 0.0), reject

        rhs = _scaled(
            mc_mean(palm, window, kernel, rp.budget,
                    seed=rp.seed, stream=f"I-2.7a:n{n}:R", threads=rp.threads),
            lam,
        )
        out.append((f"n={n}", lhs, rhs))
    return out


def _run_i27b(model, A, rp):
    lam = model.exact_rate
    r = effective_radius(A, model.scale, rp.horizon_gaps)
    lhs = est_palm_zero(model, A, 10.0 * model.scale, rp.budget, seed=rp.seed,
                        stream="I-2.7b:L", horizon_gaps=rp.horizon_gaps,
                        threads=rp.threads)
    out = []
    for n in (0, 1):
        window = guard_window(model, r + (abs(n) + 2) * model.scale * 4.0)

        def kernel(batch, ctx, n=n):
            pos0, a0, ok = straddle_gaps(batch, ctx)
            e = np.clip(pos0 + n, 0, max(batch.points.size - 1, 0))
            ok = ok & (pos0 + n >= ctx.off_lo) & (pos0 + n < ctx.off_hi)
            codes = A.at_events(ctx, e, np.arange(batch.n))
            reject = ~ok | (codes == -1)
            return np.where(~reject & (codes == 1), 1.0 / a0, 0.0), reject

        rhs = _scaled(
            mc_mean(model, window, kernel, rp.budget,
                    seed=rp.seed, stream=f"I-2.7b:n{n}:R", threads=rp.threads),
            1.0 / lam,
        )
        out.append((f"n={n}", lhs, rhs))
    return out


def _run_i28c(model, A, rp):
    partner = parse_eventuality("T1<=0.5")
    if partner == A:
        partner = parse_eventuality("count(0,1]==0")
    pad = rp.horizon_gaps * model.scale
    r = max(
        effective_radius(A, model.scale, rp.horizon_gaps),
        effective_radius(partner, model.scale, rp.horizon_gaps),
    )
    window = guard_window(model, r + pad)

    def side_kernel(f: Eventuality, g: Eventuality):
        def kernel(batch, ctx):
            codes = f.at_origin(ctx)
            pos0, a0, ok = straddle_gaps(batch, ctx)
            vals = np.zeros(batch.n)
            reject = (~ok) | (codes == -1)
            rows = np.flatnonzero(~reject & (codes == 1))
            pts = batch.points
            for i in rows:
                p = batch.pattern(i)
                t0 = pts[pos0[i]]
                t1 = pts[pos0[i] + 1]
                if t0 < -pad or t1 > pad:
                    reject[i] = True
                    continue
                integral = _segment_integral(g, p, float(t0), float(t1))
                if integral is None:
                    reject[i] = True
                else:
                    vals[i] = integral / a0[i]
            return vals, reject
        return kernel

    lhs = mc_mean(model, window, side_kernel(A, partner), rp.budget,
                  seed=rp.seed, stream="I-2.8c:L", threads=rp.threads)
    rhs = mc_mean(model, window, side_kernel(partner, A), rp.budget,
                  seed=rp.seed, stream="I-2.8c:R", threads=rp.threads)
    return [(f"partner={partner.label}", lhs, rhs)]


def _run_i210c(model, A, rp):
    lam = model.exact_rate
    out = []
    for mult in (0.5, 1.0, 3.0):
        x = mult * model.scale
        window = guard_window(model, model.scale * rp.horizon_gaps, 0.0,
                              x + model.scale)

        def kernel(batch, ctx, x=x):
            pos0, a0, ok = straddle_gaps(batch, ctx)
            pts = batch.points
            safe = np.clip(pos0, 0, max(pts.size - 2, 0))
            t0 = pts[safe]
            t1 = pts[safe + 1]
            gs, shifts = ctx.gsorted()
            # count in the half-open [x+T0, x+T1)
            cnt = (np.searchsorted(gs, x + t1 + shifts, side="left")
                   - np.searchsorted(gs, x + t0 + shifts, side="left"))
            ok = ok & (x + t1 <= ctx.whi)
            return np.where(ok, cnt / a0, 0.0), ~ok

        lhs = mc_mean(model, window, kernel, rp.budget,
                      seed=rp.seed, stream=f"I-2.10c:x{mult}:L", threads=rp.threads)
        out.append((f"x={x:g}", lhs, _exact(lam)))
    return out


def _run_i37(model, A, rp):
    # span sets the truncation of the integral over shifted laws; 14 mean
    # gaps keeps the discarded tail well inside this identity's atol.
    # The bin width drives the discretization bias of the straddle
    # condition, which is first order in the width.
    width = 0.1 * model.scale
    span = 14.0 * model.scale
    out = []
    for k in (0, 1):
        lhs = est_intermediate(model, k, A, rp.budget, seed=rp.seed,
                               stream=f"I-3.7:k{k}:L",
                               horizon_gaps=rp.horizon_gaps, threads=rp.threads)
        if k == 0:
            edges = np.arange(-span, 0.0 + width / 2, width)
        else:
            edges = np.arange(0.0, span + width / 2, width)
        centers = 0.5 * (edges[:-1] + edges[1:])
        straddles = [ev_straddle(k, float(c)) for c in centers]
        nb = centers.size
        r = effective_radius(A, model.scale, rp.horizon_gaps)
        window = guard_window(model, r + 2.0 * span, float(edges[0]), float(edges[-1]))

        def kernel(batch, ctx, edges=edges, straddles=straddles, nb=nb):
            e, rep, _ = _events_in(batch, ctx, float(edges[0]), float(edges[-1]))
            t = batch.points[e]
            bin_idx = np.searchsorted(edges, t, side="left") - 1
            keep = (bin_idx >= 0) & (bin_idx < nb)
            e, rep, bin_idx = e[keep], rep[keep], bin_idx[keep]
            codes = A.at_events(ctx, e, rep)
            codes_b = np.empty(e.size, dtype=np.int8)
            for b in range(nb):
                m = bin_idx == b
                if m.any():
                    codes_b[m] = straddles[b].at_events(ctx, e[m], rep[m])
            both = _kleene_and(codes, codes_b)
            vals = np.bincount(rep[both == 1], minlength=batch.n).astype(np.float64)
            reject = np.zeros(batch.n, dtype=bool)
            if rep.size:
                reject[rep[both == -1]] = True
            return vals, reject

        rhs = mc_mean(model, window, kernel, rp.budget,
                      seed=rp.seed, stream=f"I-3.7:k{k}:R", threads=rp.threads)
        out.append((f"k={k}", lhs, rhs))
    return out


def _run_i313(model, A, rp):
    out = []
    for x in (-1.0, 0.5):
        x = x * model.scale
        edges = np.array([x - 0.05 * model.scale, x + 0.05 * model.scale])
        lhs = est_shifted_palm(model, A, edges, rp.budget, seed=rp.seed,
                               stream=f"I-3.13:x{x}:L",
                               horizon_gaps=rp.horizon_gaps,
                               threads=rp.threads)[0].estimate
        prof_a = est_intensity(model, edges, rp.budget, A=A, seed=rp.seed,
                               stream=f"I-3.13:x{x}:RA",
                               horizon_gaps=rp.horizon_gaps, threads=rp.threads)
        prof = est_intensity(model, edges, rp.budget, seed=rp.seed,
                             stream=f"I-3.13:x{x}:RB",
                             horizon_gaps=rp.horizon_gaps, threads=rp.threads)
        num = Estimate(prof_a.values[0], prof_a.std_errors[0], rp.budget,
                       prof_a.rejected, 0.0)
        den = Estimate(prof.values[0], prof.std_errors[0], rp.budget,
                       prof.rejected, 0.0)
        out.append((f"x={x:g}", lhs, _indep_ratio(num, den)))
    return out


def _run_i44(model, A, rp):
    ts_member, es_member = _companion_pair(model)
    lhs1 = convert_es_to_ts(es_member, A, rp.budget, seed=rp.seed,
                            stream="I-4.4:es2ts:L", horizon_gaps=rp.horizon_gaps,
                            threads=rp.threads)
    rhs1 = est_event_probability(ts_member, A, rp.budget, seed=rp.seed,
                                 stream="I-4.4:es2ts:R",
                                 horizon_gaps=rp.horizon_gaps, threads=rp.threads)
    lhs2 = convert_ts_to_es(ts_member, A, rp.budget, seed=rp.seed,
                            stream="I-4.4:ts2es:L", horizon_gaps=rp.horizon_gaps,
                            threads=rp.threads)
    rhs2 = est_event_probability(es_member, A, rp.budget, seed=rp.seed,
                                 stream="I-4.4:ts2es:R",
                                 horizon_gaps=rp.horizon_gaps, threads=rp.threads)
    return [("es->ts", lhs1, rhs1), ("ts->es", lhs2, rhs2)]


def _run_i45(model, A, rp):
    ts_member, es_member = _companion_pair(model)
    lhs = _count_rate(ts_member, rp, "I-4.5:L")
    rhs = _inverted(_mean_alpha0(es_member, rp, "I-4.5:R"))
    return [("rate vs 1/mean gap", lhs, rhs)]


def _run_i52a(model, A, rp):
    info = model.tilt_info
    palm = info.base_palm()
    lam = info.base_rate
    window = guard_window(palm, palm.scale * rp.horizon_gaps)

    def delta0_kernel(with_a: bool):
        def kernel(batch, ctx):
            sigma = info.tilt.value_batch(batch)
            _, a0, ok = straddle_gaps(batch, ctx)
            vals = lam * a0 * sigma
            reject = ~ok
            if with_a:
                codes = A.at_origin(ctx)
                reject = reject | (codes == -1)
                vals = np.where(codes == 1, vals, 0.0)
            return np.where(reject, 0.0, vals), reject
        return kernel

    norm = mc_mean(palm, window, delta0_kernel(False), rp.budget,
                   seed=rp.seed, stream="I-5.2a:norm", threads=rp.threads)
    lhs_b = est_intermediate(model, 0, A, rp.budget, seed=rp.seed,
                             stream="I-5.2a:L", horizon_gaps=rp.horizon_gaps,
                             threads=rp.threads)
    rhs_b = mc_mean(palm, window, delta0_kernel(True), rp.budget,
                    seed=rp.seed, stream="I-5.2a:R", threads=rp.threads)
    return [("normalization", norm, _exact(1.0)), ("reweighted", lhs_b, rhs_b)]


def _run_i71b(model, A, rp):
    lhs = est_event_probability(model, A, rp.budget, seed=rp.seed,
                                stream="I-7.1b:L", horizon_gaps=rp.horizon_gaps,
                                threads=rp.threads)
    rhs = est_event_probability(pstar_model(model), A, rp.budget, seed=rp.seed,
                                stream="I-7.1b:R", horizon_gaps=rp.horizon_gaps,
                                threads=rp.threads)
    return [("uniform re-centering fixed point", lhs, rhs)]


def _run_i81a(model, A, rp):
    info = model.tilt_info
    palm = info.base_palm()
    lam = info.base_rate
    half = 0.025 * model.scale
    out = []
    for y in (0.0, 1.0, -1.0, 2.0, -2.0):
        y = y * model.scale
        edges = np.array([y - half, y + half])
        prof = est_intensity(model, edges, rp.budget, seed=rp.seed,
                             stream=f"I-8.1a:y{y}:L",
                             horizon_gaps=rp.horizon_gaps, threads=rp.threads)
        lhs = Estimate(prof.values[0], prof.std_errors[0], rp.budget,
                       prof.rejected, 0.0)
        window = guard_window(palm, palm.scale * rp.horizon_gaps + abs(y))

        def kernel(batch, ctx, y=y):
            vals, ok = _tilt_shifted_value(model, ctx, -y)
            return np.where(ok, vals, 0.0), ~ok

        rhs = _scaled(
            mc_mean(palm, window, kernel, rp.budget,
                    seed=rp.seed, stream=f"I-8.1a:y{y}:R", threads=rp.threads),
            lam,
        )
        out.append((f"y={y:g}", lhs, rhs))
    return out


def _run_i84rho(model, A, rp):
    info = model.tilt_info
    palm = info.base_palm()
    lam = info.base_rate
    half = 0.05 * model.scale
    r = effective_radius(A, model.scale, rp.horizon_gaps)
    out = []
    for x in (-1.0, 0.5):
        x = x * model.scale
        edges = np.array([x - half, x + half])
        lhs = est_shifted_palm(model, A, edges, rp.budget, seed=rp.seed,
                               stream=f"I-8.4rho:x{x}:L",
                               horizon_gaps=rp.horizon_gaps,
                               threads=rp.threads)[0].estimate
        window = guard_window(palm, r + palm.scale * rp.horizon_gaps + abs(x))

        def kernel(batch, ctx, x=x):
            idx, ok = _gap_at(ctx, -x)
            gap = batch.points[idx + 1] - batch.points[idx]
            codes = A.at_origin(ctx)
            reject = ~ok | (codes == -1)
            return np.where(~reject & (codes == 1), gap, 0.0), reject

        factor = lam / (2.0 - math.exp(-lam * abs(x)))
        rhs = _scaled(
            mc_mean(palm, window, kernel, rp.budget,
                    seed=rp.seed, stream=f"I-8.4rho:x{x}:R", threads=rp.threads),
            factor,
        )
        out.append((f"x={x:g}", lhs, rhs))
    return out


# -- applicability --------------------------------------------------------------


def _is_ts(model: ProcessModel) -> bool:
    return model.is_ts


def _has_palm_pair(model: ProcessModel) -> bool:
    return model.is_ts and model.palm_companion() is not None and model.exact_rate is not None


def _has_interval_pair(model: ProcessModel) -> bool:
    return model.interval is not None and (model.is_ts or model.is_es)


def _is_tilted(model: ProcessModel) -> bool:
    return model.tilt_info is not None


def _companion_pair(model: ProcessModel):
    if model.interval is None:
        raise NotApplicable("model has no renewal-interval structure")
    if model.is_ts:
        return model, renewal_es(model.interval)
    if model.is_es:
        return renewal_ts_from_es(model.interval), model
    raise NotApplicable("model is neither TS nor ES")


REGISTRY: tuple[IdentitySpec, ...] = (
    IdentitySpec("I-2.3", "count rate equals the mean inverse straddling gap",
                 False, _is_ts, _run_i23),
    IdentitySpec("I-2.4", "event-centered ratio estimate is invariant in the window length",
                 True, _is_ts, _run_i24),
    IdentitySpec("I-2.6", "inversion: plain probability from the event-centered law",
                 True, _has_palm_pair, _run_i26),
    IdentitySpec("I-2.7a", "re-centered law as a gap-weighted event-centered mean",
                 True, _has_palm_pair, _run_i27a),
    IdentitySpec("I-2.7b", "event-centered law as an inverse-gap-weighted plain mean",
                 True, _is_ts, _run_i27b),
    IdentitySpec("I-2.8c", "symmetry of gap-averaged pairings",
                 True, _is_ts, _run_i28c),
    IdentitySpec("I-2.10c", "displaced straddling-interval count rate is the intensity",
                 False, _is_ts, _run_i210c),
    IdentitySpec("I-3.7", "re-centered law as a binned integral of shifted event-centered laws",
                 True, _is_tilted, _run_i37, atol=0.01, budget_factor=2.0),
    IdentitySpec("I-3.13", "shifted event-centered law equals the intensity ratio",
                 True, _is_tilted, _run_i313),
    IdentitySpec("I-4.4", "stationary limit conversions agree with direct simulation",
                 True, _has_interval_pair, _run_i44),
    IdentitySpec("I-4.5", "limit count rate is the inverse limit mean gap",
                 False, _has_interval_pair, _run_i45),
    IdentitySpec("I-5.2a", "re-centered density against the base event-centered law",
                 True, _is_tilted, _run_i52a),
    IdentitySpec("I-7.1b", "shift-local weight makes the law a re-centering fixed point",
                 True, _is_tilted, _run_i71b),
    IdentitySpec("I-8.1a", "intensity profile from the shifted weight functional",
                 False, _is_tilted, _run_i81a),
    IdentitySpec("I-8.4rho", "shifted event-centered law from the gap-length reweighting",
                 True, _is_tilted, _run_i84rho),
)

REGISTRY_BY_ID = {spec.id: spec for spec in REGISTRY}

DEFAULT_SUITE_MODELS = (
    poisson_ts(1.0),
    renewal_ts_from_es(gamma_intervals(2.0, 1.0)),
    example84_exact(1.0),
)


def check_identity(
    spec: IdentitySpec,
    model: ProcessModel,
    A: Eventuality | None,
    budget: int = 100_000,
    *,
    seed: int = 2026,
    z_crit: float = Z_CRIT,
    horizon_gaps: float = 15.0,
    threads: int = 1,
) -> IdentityReport:
    """Evaluate one identity on one model; reports the worst probe."""
    if not spec.applies(model):
        raise NotApplicable(f"{spec.id} does not apply to {model.label}")
    if spec.needs_eventuality and A is None:
        raise ValueError(f"{spec.id} needs an eventuality")
    rp = RunParams(int(budget * spec.budget_factor), seed, horizon_gaps, threads)
    probes = spec.run(model, A, rp)
    worst = None
    all_pass = True
    for note, lhs, rhs in probes:
        se = combined_se(lhs, rhs)
        diff = abs(lhs.value - rhs.value)
        z = diff / se if se > 0 else (math.inf if diff > spec.atol else 0.0)
        ok = diff <= z_crit * se + spec.atol
        all_pass &= ok
        if worst is None or z > worst[3]:
            worst = (note, lhs, rhs, z)
    note, lhs, rhs, z = worst
    return IdentityReport(
        spec.id,
        model.label,
        A.label if (spec.needs_eventuality and A is not None) else "-",
        note,
        lhs,
        rhs,
        z,
        "pass" if all_pass else "fail",
        rp.budget,
    )


def run_suite(
    models: Sequence[ProcessModel] = DEFAULT_SUITE_MODELS,
    budget: int = 100_000,
    *,
    seed: int = 2026,
    battery: Sequence[Eventuality] = SUITE_BATTERY,
    only: str | None = None,
    z_crit: float = Z_CRIT,
    horizon_gaps: float = 15.0,
    threads: int = 1,
) -> list[IdentityReport]:
    """Every applicable (identity, model, battery-eventuality) triple, in
    deterministic order; non-applicable pairs are skipped."""
    reports = []
    for spec in REGISTRY:
        if only is not None and spec.id != only:
            continue
        for model in models:
            if not spec.applies(model):
                continue
            choices = battery if spec.needs_eventuality else [None]
            for A in choices:
                reports.append(
                    check_identity(spec, model, A, budget, seed=seed,
                                   z_crit=z_crit, horizon_gaps=horizon_gaps,
                                   threads=threads)
                )
    return reports
