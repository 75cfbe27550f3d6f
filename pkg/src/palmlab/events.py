"""Eventualities: local boolean functionals on patterns, with combinators.

An eventuality carries a dependency radius: its value may only depend on
events within [-radius, radius] of the pattern it is applied to.  Index
based families (gap comparisons, first-arrival bounds) have no a priori
bound, so their radius is None and estimator runs supply a horizon.

Evaluations are three-valued.  When the window does not hold the events
needed to decide, the result is Indeterminate (None, or code -1 in array
form); estimators treat that as a rejected replication, never as False.

Textual form (used by the CLI and round-tripped by the parser):

    expr   := term ('|' term)*
    term   := factor ('&' factor)*
    factor := '!' factor | '(' expr ')' | atom
    atom   := 'alpha(' INT ')' ('>' | '==') NUM
            | 'count(' NUM ',' NUM ']==' INT
            | 'T1<=' NUM
            | 'true'
"""

from __future__ import annotations

import re

import numpy as np

from .errors import IndexOutOfPattern, NoStraddle, OutsideWindow
from .pattern import PatternBatch, PointPattern

_PATTERN_ERRORS = (NoStraddle, IndexOutOfPattern, OutsideWindow)


def _fmt(x: float) -> str:
    xf = float(x)
    if xf == int(xf) and abs(xf) < 1e15:
        return str(int(xf))
    return repr(xf)


class EventContext:
    """Shared precomputation for vectorized evaluation on a batch."""

    __slots__ = ("batch", "points", "off_lo", "off_hi", "wlo", "whi", "_gs", "_pos0")

    def __init__(self, batch: PatternBatch):
        self.batch = batch
        self.points = batch.points
        self.off_lo = batch.offsets[:-1]
        self.off_hi = batch.offsets[1:]
        self.wlo = batch.windows[:, 0]
        self.whi = batch.windows[:, 1]
        self._gs = None
        self._pos0 = None

    def gsorted(self):
        if self._gs is None:
            self._gs = self.batch.global_sorted()
        return self._gs

    def pos0(self) -> np.ndarray:
        """Raw array position of T_0 per replication.

        Equals off_lo - 1 when the replication has no event <= 0 and
        off_hi - 1 when it has no positive event; bounds checks against
        the replication's offsets decide what is actually usable.
        """
        if self._pos0 is None:
            gs, shifts = self.gsorted()
            self._pos0 = np.searchsorted(gs, shifts, side="right") - 1
        return self._pos0


def _kleene_and(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.full(u.shape, -1, dtype=np.int8)
    out[(u == 0) | (v == 0)] = 0
    out[(u == 1) & (v == 1)] = 1
    return out


def _kleene_or(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.full(u.shape, -1, dtype=np.int8)
    out[(u == 1) | (v == 1)] = 1
    out[(u == 0) & (v == 0)] = 0
    return out


def _kleene_not(u: np.ndarray) -> np.ndarray:
    out = u.copy()
    mask = u >= 0
    out[mask] = 1 - u[mask]
    return out


def _edges(breaks: np.ndarray, y_lo: float, y_hi: float) -> np.ndarray:
    inner = np.unique(breaks[(breaks > y_lo) & (breaks < y_hi)])
    return np.concatenate(([y_lo], inner, [y_hi]))


class Eventuality:
    """Base class; subclasses are immutable and safe to share."""

    label: str
    radius: float | None

    # -- scalar evaluation ------------------------------------------------

    def evaluate(self, p: PointPattern) -> bool | None:
        """True/False, or None when the pattern lacks the needed context."""
        raise NotImplementedError

    # -- vectorized evaluation at events ----------------------------------

    def at_events(self, ctx: EventContext, e: np.ndarray, rep: np.ndarray) -> np.ndarray:
        """Codes (1/0/-1) of the eventuality seen from events at array positions e."""
        raise NotImplementedError

    def at_origin(self, ctx: EventContext) -> np.ndarray:
        """Codes (1/0/-1) of the eventuality at each replication's own origin."""
        raise NotImplementedError

    # -- exact piecewise form in the time-shift variable -------------------

    def segments(self, p: PointPattern, y_lo: float, y_hi: float):
        """(edges, vals): vals[i] is the code of the eventuality seen from y
        for y between edges[i] and edges[i+1]; exact, no discretization."""
        raise NotImplementedError

    def segment_breaks(self, p: PointPattern, y_lo: float, y_hi: float) -> np.ndarray:
        raise NotImplementedError

    # -- sugar --------------------------------------------------------------

    def __and__(self, other):
        return ev_and(self, other)

    def __or__(self, other):
        return ev_or(self, other)

    def __invert__(self):
        return ev_not(self)

    def __eq__(self, other):
        return isinstance(other, Eventuality) and self.label == other.label

    def __hash__(self):
        return hash(self.label)

    def __repr__(self):
        return f"<Eventuality {self.label}>"


class _Const(Eventuality):
    def __init__(self, value: bool):
        self.value = bool(value)
        self.label = "true" if value else "!true"
        self.radius = 0.0

    def evaluate(self, p):
        return self.value

    def at_events(self, ctx, e, rep):
        return np.full(e.shape, 1 if self.value else 0, dtype=np.int8)

    def at_origin(self, ctx):
        return np.full(ctx.batch.n, 1 if self.value else 0, dtype=np.int8)

    def segments(self, p, y_lo, y_hi):
        return np.array([y_lo, y_hi]), np.array([1 if self.value else 0], dtype=np.int8)


class _AlphaCmp(Eventuality):
    """Gap comparison [alpha_n > c] or [alpha_n == c]."""

    def __init__(self, n: int, c: float, op: str, radius: float | None = None):
        if op not in (">", "=="):
            raise ValueError(f"unsupported comparison {op!r}")
        self.n = int(n)
        self.c = float(c)
        self.op = op
        self.radius = radius
        self.label = f"alpha({self.n}){op}{_fmt(self.c)}"

    def _cmp(self, gap):
        return gap > self.c if self.op == ">" else gap == self.c

    def evaluate(self, p):
        try:
            return bool(self._cmp(p.interval(self.n)))
        except _PATTERN_ERRORS:
            return None

    def at_events(self, ctx, e, rep):
        g = e + self.n
        valid = (g >= ctx.off_lo[rep]) & (g + 1 < ctx.off_hi[rep])
        gc = np.clip(g, 0, ctx.points.size - 2)
        gap = ctx.points[gc + 1] - ctx.points[gc]
        out = self._cmp(gap).astype(np.int8)
        out[~valid] = -1
        return out

    def at_origin(self, ctx):
        g = ctx.pos0() + self.n
        valid = (g >= ctx.off_lo) & (g + 1 < ctx.off_hi)
        gc = np.clip(g, 0, max(ctx.points.size - 2, 0))
        out = self._cmp(ctx.points[gc + 1] - ctx.points[gc]).astype(np.int8)
        out[~valid] = -1
        return out

    def segments(self, p, y_lo, y_hi):
        pts = p.points
        edges = _edges(pts, y_lo, y_hi)
        mids = 0.5 * (edges[:-1] + edges[1:])
        j = np.searchsorted(pts, mids, side="right") - 1
        g = j + self.n
        valid = (j >= 0) & (g >= 0) & (g + 1 < pts.size)
        gc = np.clip(g, 0, pts.size - 2)
        vals = self._cmp(pts[gc + 1] - pts[gc]).astype(np.int8)
        vals[~valid] = -1
        return edges, vals


class _CountEq(Eventuality):
    """[N(a, b] == k] with the count taken around the evaluation origin."""

    def __init__(self, a: float, b: float, k: int):
        if not a < b:
            raise ValueError("need a < b")
        if k < 0:
            raise ValueError("need k >= 0")
        self.a = float(a)
        self.b = float(b)
        self.k = int(k)
        self.radius = max(abs(self.a), abs(self.b))
        self.label = f"count({_fmt(self.a)},{_fmt(self.b)}]=={self.k}"

    def evaluate(self, p):
        try:
            return p.count(self.a, self.b) == self.k
        except OutsideWindow:
            return None

    def at_events(self, ctx, e, rep):
        gs, shift = ctx.gsorted()
        t = ctx.points[e]
        s = shift[rep]
        hi = np.searchsorted(gs, t + self.b + s, side="right")
        lo = np.searchsorted(gs, t + self.a + s, side="right")
        out = ((hi - lo) == self.k).astype(np.int8)
        valid = (t + self.a >= ctx.wlo[rep]) & (t + self.b <= ctx.whi[rep])
        out[~valid] = -1
        return out

    def at_origin(self, ctx):
        gs, shift = ctx.gsorted()
        hi = np.searchsorted(gs, self.b + shift, side="right")
        lo = np.searchsorted(gs, self.a + shift, side="right")
        out = ((hi - lo) == self.k).astype(np.int8)
        valid = (self.a >= ctx.wlo) & (self.b <= ctx.whi)
        out[~valid] = -1
        return out

    def segments(self, p, y_lo, y_hi):
        pts = p.points
        lo_w, hi_w = p.window
        # event T sits in (y+a, y+b] exactly for y in [T-b, T-a)
        breaks = np.concatenate((pts - self.b, pts - self.a, [lo_w - self.a, hi_w - self.b]))
        edges = _edges(breaks, y_lo, y_hi)
        mids = 0.5 * (edges[:-1] + edges[1:])
        cnt = (np.searchsorted(pts, mids + self.b, side="right")
               - np.searchsorted(pts, mids + self.a, side="right"))
        vals = (cnt == self.k).astype(np.int8)
        invalid = (mids + self.a < lo_w) | (mids + self.b > hi_w)
        vals[invalid] = -1
        return edges, vals


class _FirstLe(Eventuality):
    """[T_1 <= t]: the first event after the origin arrives within t."""

    def __init__(self, t: float, radius: float | None = None):
        if not t > 0:
            raise ValueError("need t > 0")
        self.t = float(t)
        self.radius = radius
        self.label = f"T1<={_fmt(self.t)}"

    def evaluate(self, p):
        try:
            return bool(p.t(1) <= self.t)
        except _PATTERN_ERRORS:
            return None

    def at_events(self, ctx, e, rep):
        valid = e + 1 < ctx.off_hi[rep]
        ec = np.clip(e + 1, 0, ctx.points.size - 1)
        out = (ctx.points[ec] - ctx.points[e] <= self.t).astype(np.int8)
        out[~valid] = -1
        return out

    def at_origin(self, ctx):
        fp = ctx.pos0() + 1  # first positive event, off_hi sentinel if none
        valid = fp < ctx.off_hi
        pc = np.clip(fp, 0, max(ctx.points.size - 1, 0))
        out = (ctx.points[pc] <= self.t).astype(np.int8)
        out[~valid] = -1
        return out

    def segments(self, p, y_lo, y_hi):
        pts = p.points
        _, hi_w = p.window
        # an event T makes [T1 <= t] true for y in [T-t, T)
        breaks = np.concatenate((pts - self.t, pts, [hi_w - self.t]))
        edges = _edges(breaks, y_lo, y_hi)
        mids = 0.5 * (edges[:-1] + edges[1:])
        cnt = (np.searchsorted(pts, mids + self.t, side="right")
               - np.searchsorted(pts, mids, side="right"))
        vals = (cnt >= 1).astype(np.int8)
        # with no stored event within t, the truth depends on events past hi
        unknown = (vals == 0) & (mids + self.t > hi_w)
        vals[unknown] = -1
        return edges, vals


class _PrevStraddle(Eventuality):
    """[T_-k <= -x < T_-k+1]: standing on an event, the origin of the original
    frame at distance x falls between the k-th previous event and its successor."""

    def __init__(self, k: int, x: float):
        self.k = int(k)
        self.x = float(x)
        self.radius = None
        self.label = f"straddle({self.k},{_fmt(self.x)})"

    def evaluate(self, p):
        try:
            return bool(p.t(-self.k) <= -self.x < p.t(-self.k + 1))
        except _PATTERN_ERRORS:
            return None

    def at_events(self, ctx, e, rep):
        i = e - self.k
        valid = (i >= ctx.off_lo[rep]) & (i + 1 < ctx.off_hi[rep])
        ic = np.clip(i, 0, ctx.points.size - 2)
        t_lo = ctx.points[ic] - ctx.points[e]
        t_hi = ctx.points[ic + 1] - ctx.points[e]
        out = ((t_lo <= -self.x) & (-self.x < t_hi)).astype(np.int8)
        out[~valid] = -1
        return out

    def at_origin(self, ctx):
        i = ctx.pos0() - self.k
        valid = (i >= ctx.off_lo) & (i + 1 < ctx.off_hi)
        ic = np.clip(i, 0, max(ctx.points.size - 2, 0))
        out = ((ctx.points[ic] <= -self.x) & (-self.x < ctx.points[ic + 1])).astype(np.int8)
        out[~valid] = -1
        return out


class _Not(Eventuality):
    def __init__(self, inner: Eventuality):
        self.inner = inner
        self.radius = inner.radius
        body = inner.label
        if isinstance(inner, (_And, _Or)):
            body = f"({body})"
        self.label = f"!{body}"

    def evaluate(self, p):
        v = self.inner.evaluate(p)
        return None if v is None else not v

    def at_events(self, ctx, e, rep):
        return _kleene_not(self.inner.at_events(ctx, e, rep))

    def at_origin(self, ctx):
        return _kleene_not(self.inner.at_origin(ctx))

    def segments(self, p, y_lo, y_hi):
        edges, vals = self.inner.segments(p, y_lo, y_hi)
        return edges, _kleene_not(vals)


def _merge_segments(p, y_lo, y_hi, left: Eventuality, right: Eventuality, combine):
    e1, v1 = left.segments(p, y_lo, y_hi)
    e2, v2 = right.segments(p, y_lo, y_hi)
    edges = np.unique(np.concatenate((e1, e2)))
    mids = 0.5 * (edges[:-1] + edges[1:])
    u = v1[np.searchsorted(e1, mids, side="right") - 1]
    v = v2[np.searchsorted(e2, mids, side="right") - 1]
    return edges, combine(u, v)


class _And(Eventuality):
    def __init__(self, left, right):
        self.left, self.right = left, right
        self.radius = (None if left.radius is None or right.radius is None
                       else max(left.radius, right.radius))
        self.label = f"({left.label} & {right.label})"

    def evaluate(self, p):
        u, v = self.left.evaluate(p), self.right.evaluate(p)
        if u is False or v is False:
            return False
        if u is None or v is None:
            return None
        return True

    def at_events(self, ctx, e, rep):
        return _kleene_and(self.left.at_events(ctx, e, rep), self.right.at_events(ctx, e, rep))

    def at_origin(self, ctx):
        return _kleene_and(self.left.at_origin(ctx), self.right.at_origin(ctx))

    def segments(self, p, y_lo, y_hi):
        return _merge_segments(p, y_lo, y_hi, self.left, self.right, _kleene_and)


class _Or(Eventuality):
    def __init__(self, left, right):
        self.left, self.right = left, right
        self.radius = (None if left.radius is None or right.radius is None
                       else max(left.radius, right.radius))
        self.label = f"({left.label} | {right.label})"

    def evaluate(self, p):
        u, v = self.left.evaluate(p), self.right.evaluate(p)
        if u is True or v is True:
            return True
        if u is None or v is None:
            return None
        return False

    def at_events(self, ctx, e, rep):
        return _kleene_or(self.left.at_events(ctx, e, rep), self.right.at_events(ctx, e, rep))

    def at_origin(self, ctx):
        return _kleene_or(self.left.at_origin(ctx), self.right.at_origin(ctx))

    def segments(self, p, y_lo, y_hi):
        return _merge_segments(p, y_lo, y_hi, self.left, self.right, _kleene_or)


# -- catalog constructors -------------------------------------------------


def ev_true() -> Eventuality:
    return _Const(True)


def ev_interval_gt(n: int, c: float, radius: float | None = None) -> Eventuality:
    """[alpha_n > c]; radius is a caller-supplied bound covering T_n and T_n+1."""
    if c < 0:
        raise ValueError("need c >= 0")
    return _AlphaCmp(n, c, ">", radius)


def ev_interval_eq(n: int, c: float, radius: float | None = None) -> Eventuality:
    """[alpha_n == c]; useful for lattice patterns where gaps are exact floats."""
    return _AlphaCmp(n, c, "==", radius)


def ev_count_eq(a: float, b: float, k: int) -> Eventuality:
    """[N(a, b] == k]; radius max(|a|, |b|)."""
    return _CountEq(a, b, k)


def ev_first_point_le(t: float, radius: float | None = None) -> Eventuality:
    """[T_1 <= t]."""
    return _FirstLe(t, radius)


def ev_straddle(k: int, x: float) -> Eventuality:
    """[T_-k <= -x < T_-k+1] on event-centered patterns (identity plumbing)."""
    return _PrevStraddle(k, x)


def ev_and(e: Eventuality, f: Eventuality) -> Eventuality:
    return _And(e, f)


def ev_or(e: Eventuality, f: Eventuality) -> Eventuality:
    return _Or(e, f)


def ev_not(e: Eventuality) -> Eventuality:
    if isinstance(e, _Not):
        return e.inner
    return _Not(e)


# [alpha_0 = 1]: the distinguished eventuality of the non-AMS lattice model,
# whose gap encoding makes its indicator at T_i reproduce the 0/1 label x_i.
# Gaps there are 1 or 2, so a radius of 4 always covers T_0 and T_1.
def ev_example44() -> Eventuality:
    return ev_interval_eq(0, 1.0, radius=4.0)


def effective_radius(ev: Eventuality, scale: float, horizon_gaps: float) -> float:
    """Concrete radius when declared, otherwise the run's horizon."""
    return ev.radius if ev.radius is not None else horizon_gaps * scale


# -- parser ---------------------------------------------------------------

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN = re.compile(
    r"\s*(alpha|count|T1|true|==|<=|>|!|\(|\)|\]|,|&|\|" + f"|{_NUM})"
)


class _Tokens:
    def __init__(self, text: str):
        self.toks: list[str] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                if text[pos:].strip() == "":
                    break
                raise ValueError(f"cannot tokenize eventuality text at: {text[pos:]!r}")
            self.toks.append(m.group(1))
            pos = m.end()
        self.i = 0

    def peek(self) -> str | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def pop(self, expect: str | None = None) -> str:
        tok = self.peek()
        if tok is None:
            raise ValueError("unexpected end of eventuality text")
        if expect is not None and tok != expect:
            raise ValueError(f"expected {expect!r}, got {tok!r}")
        self.i += 1
        return tok

    def pop_number(self) -> float:
        tok = self.pop()
        try:
            return float(tok)
        except ValueError:
            raise ValueError(f"expected a number, got {tok!r}") from None


def parse_eventuality(text: str) -> Eventuality:
    """Parse the textual eventuality language; inverse of the label form."""
    toks = _Tokens(text)
    expr = _parse_or(toks)
    if toks.peek() is not None:
        raise ValueError(f"trailing input in eventuality text: {toks.peek()!r}")
    return expr


def _parse_or(toks):
    node = _parse_and(toks)
    while toks.peek() == "|":
        toks.pop()
        node = ev_or(node, _parse_and(toks))
    return node


def _parse_and(toks):
    node = _parse_factor(toks)
    while toks.peek() == "&":
        toks.pop()
        node = ev_and(node, _parse_factor(toks))
    return node


def _parse_factor(toks):
    tok = toks.peek()
    if tok == "!":
        toks.pop()
        return ev_not(_parse_factor(toks))
    if tok == "(":
        toks.pop()
        node = _parse_or(toks)
        toks.pop(")")
        return node
    return _parse_atom(toks)


def _parse_atom(toks):
    tok = toks.pop()
    if tok == "true":
        return ev_true()
    if tok == "alpha":
        toks.pop("(")
        n = toks.pop_number()
        if n != int(n):
            raise ValueError("alpha() index must be an integer")
        toks.pop(")")
        op = toks.pop()
        c = toks.pop_number()
        if op == ">":
            return ev_interval_gt(int(n), c)
        if op == "==":
            return ev_interval_eq(int(n), c)
        raise ValueError(f"unsupported alpha comparison {op!r}")
    if tok == "count":
        toks.pop("(")
        a = toks.pop_number()
        toks.pop(",")
        b = toks.pop_number()
        toks.pop("]")
        toks.pop("==")
        k = toks.pop_number()
        if k != int(k):
            raise ValueError("count comparison needs an integer")
        return ev_count_eq(a, b, int(k))
    if tok == "T1":
        toks.pop("<=")
        return ev_first_point_le(toks.pop_number())
    raise ValueError(f"unexpected token {tok!r}")


# Ten-member comparison battery used by the model-agreement invariants.
BATTERY = tuple(
    parse_eventuality(text)
    for text in (
        "alpha(0)>0.5",
        "alpha(0)>1",
        "alpha(0)>2",
        "alpha(1)>1",
        "alpha(-1)>1",
        "count(0,1]==0",
        "count(0,1]==1",
        "count(-1,1]==2",
        "T1<=0.5",
        "(alpha(0)>1 & count(0,2]==1)",
    )
)

# Smaller battery used when sweeping the identity registry.
SUITE_BATTERY = tuple(
    parse_eventuality(text)
    for text in ("alpha(0)>1", "count(0,1]==0", "alpha(-1)>0.5")
)
