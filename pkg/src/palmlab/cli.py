"""Experiment runner.

Configuration is a flat key-value file with one section per subcommand
(INI syntax).  Example:

    [palm]
    model = poisson_ts
    rate = 1.0
    eventualities = alpha(0)>1; count(0,1]==0
    x = 10.0
    reps = 100000
    seed = 7

Model fields use the stable names from the model descriptors
(model/rate/interval/shape/value/lo/hi/pattern_len/tilt...).  Eventuality
lists are semicolon-separated expressions in the textual grammar.  The
suite subcommand takes extra sections named [suite:model:<n>], one model
each; without them it runs the default catalog.

All randomness flows from one root seed through counter-based streams;
``--seed`` beats the PALMLAB_SEED environment variable, which beats the
config file.  Outputs are CSV (RFC-4180 quoting, header row always) and
one JSON verdict object per AMS run.  Exit codes: 0 success, 1 suite
failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import ams as ams_mod
from . import estimate as est_mod
from . import identities as id_mod
from .errors import ConfigError, PalmLabError, TooFewCheckpoints
from .events import parse_eventuality
from .models import (
    example44_block_ends,
    example44_cesaro_exact,
    example44_run_lengths,
    model_from_config,
)
from .pattern import write_patterns

DEFAULT_SEED = 2026
DEFAULT_REPS = 100_000


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


class Run:
    """One subcommand invocation: merged config section + CLI flags."""

    def __init__(self, section: str, args):
        self.section = section
        self.cfg: dict[str, str] = {}
        self.parser = None
        if args.config:
            parser = configparser.ConfigParser()
            read = parser.read(args.config)
            if not read:
                raise ConfigError(f"cannot read config file {args.config!r}")
            self.parser = parser
            if parser.has_section(section):
                self.cfg.update({k: v.strip().strip('"') for k, v in parser.items(section)})
        self.args = args

    def get(self, key: str, default=None):
        return self.cfg.get(key, default)

    def require(self, key: str) -> str:
        value = self.get(key)
        if value is None:
            raise ConfigError(f"missing required field {key!r} in section [{self.section}]")
        return value

    def get_int(self, key: str, default=None) -> int:
        raw = self.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required field {key!r} in section [{self.section}]")
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"field {key!r} must be an integer, got {raw!r}") from None

    def get_float(self, key: str, default=None) -> float:
        raw = self.get(key)
        if raw is None:
            if default is None:
                raise ConfigError(f"missing required field {key!r} in section [{self.section}]")
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"field {key!r} must be a number, got {raw!r}") from None

    @property
    def seed(self) -> int:
        if self.args.seed is not None:
            return self.args.seed
        env = os.environ.get("PALMLAB_SEED")
        if env is not None:
            try:
                return int(env)
            except ValueError:
                raise ConfigError(f"PALMLAB_SEED must be an integer, got {env!r}") from None
        return self.get_int("seed", DEFAULT_SEED)

    @property
    def reps(self) -> int:
        if self.args.reps is not None:
            return self.args.reps
        return self.get_int("reps", DEFAULT_REPS)

    @property
    def threads(self) -> int:
        if self.args.threads is not None:
            return self.args.threads
        return self.get_int("threads", 1)

    @property
    def out_dir(self) -> Path:
        out = Path(self.args.out) if self.args.out else Path(self.get("out", "."))
        out.mkdir(parents=True, exist_ok=True)
        return out

    @property
    def horizon(self) -> float:
        return self.get_float("horizon_gaps", 15.0)

    def model(self):
        if "model" not in self.cfg:
            raise ConfigError(f"missing required field 'model' in section [{self.section}]")
        try:
            return model_from_config(self.cfg)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid model configuration: {exc}") from None

    def eventualities(self):
        raw = self.get("eventualities")
        if raw is None:
            raise ConfigError(
                f"missing required field 'eventualities' in section [{self.section}]"
            )
        texts = [t.strip() for t in raw.split(";") if t.strip()]
        if not texts:
            raise ConfigError("field 'eventualities' lists no expressions")
        try:
            return [parse_eventuality(t) for t in texts]
        except ValueError as exc:
            raise ConfigError(f"bad eventuality expression: {exc}") from None


def _estimate_rows(label, est):
    return [label, est.value, est.std_error, est.reps, est.rejected, est.ess]


# -- subcommands ---------------------------------------------------------------


def cmd_simulate(run: Run) -> int:
    from .models import example44_natural_window

    model = run.model()
    if model.descriptor.get("model") == "example44":
        nat_lo, nat_hi = example44_natural_window(model.descriptor["pattern_len"])
    else:
        nat_lo, nat_hi = -20.0 * model.scale, 20.0 * model.scale
    lo = run.get_float("window_lo", nat_lo)
    hi = run.get_float("window_hi", nat_hi)
    reps = run.reps if run.args.reps is not None or "reps" in run.cfg else 10
    from .rng import chunk_rng

    patterns = []
    for i in range(reps):
        gen = chunk_rng(run.seed, "simulate", i)
        patterns.append(model.sample(gen, (lo, hi)).pattern)
    out = run.out_dir / "patterns.txt"
    write_patterns(out, patterns)
    print(f"wrote {reps} patterns to {out}")
    return 0


def cmd_palm(run: Run) -> int:
    model = run.model()
    evs = run.eventualities()
    mode = run.get("mode", "zero")
    out = run.out_dir / "palm.csv"
    if mode == "zero":
        x = run.get_float("x", 10.0 * model.scale)
        rows = []
        for ev in evs:
            est = est_mod.est_palm_zero(
                model, ev, x, run.reps, seed=run.seed, stream=f"palm:{ev.label}",
                horizon_gaps=run.horizon, threads=run.threads,
            )
            rows.append(_estimate_rows(ev.label, est))
        _write_csv(out, ["label", "value", "std_error", "reps", "rejected", "ess"], rows)
    elif mode == "shifted":
        lo = run.get_float("bin_lo")
        hi = run.get_float("bin_hi")
        width = run.get_float("bin_width", 0.25 * model.scale)
        edges = np.arange(lo, hi + width / 2, width)
        rows = []
        for ev in evs:
            bins = est_mod.est_shifted_palm(
                model, ev, edges, run.reps, seed=run.seed, stream=f"palm:{ev.label}",
                horizon_gaps=run.horizon, threads=run.threads,
            )
            for b in bins:
                rows.append([b.bin_lo, b.bin_hi] + _estimate_rows(ev.label, b.estimate))
        _write_csv(
            out,
            ["bin_lo", "bin_hi", "label", "value", "std_error", "reps", "rejected", "ess"],
            rows,
        )
    else:
        raise ConfigError(f"field 'mode' must be 'zero' or 'shifted', got {mode!r}")
    print(f"wrote {out}")
    return 0


def _verdict_json(verdict) -> dict:
    obj = {
        "status": verdict.status,
        "oscillation": verdict.oscillation,
        "threshold": verdict.threshold,
        "tail_fraction": verdict.tail_fraction,
    }
    if verdict.limit is not None:
        obj["limit"] = verdict.limit
        obj["limit_se"] = verdict.limit_se
    return obj


def _run_ams(run: Run, model, ev, prefix: str) -> int:
    kind = run.get("kind", "event")
    tol = run.get_float("tol", 0.05)
    tail = run.get_float("tail_fraction", 0.5)
    if kind == "event":
        n_max = run.get_int("n_max", 256)
        trace = ams_mod.cesaro_event(model, ev, n_max, run.reps, seed=run.seed,
                                     horizon_gaps=run.horizon, threads=run.threads)
    elif kind == "time":
        x_max = run.get_float("x_max", 256.0 * model.scale)
        trace = ams_mod.cesaro_time(model, ev, x_max, run.reps, seed=run.seed,
                                    horizon_gaps=run.horizon, threads=run.threads)
    else:
        raise ConfigError(f"field 'kind' must be 'event' or 'time', got {kind!r}")
    trace_path = run.out_dir / f"{prefix}_trace.csv"
    _write_csv(
        trace_path,
        ["checkpoint", "value", "std_error"],
        zip(trace.checkpoints, trace.values, trace.std_errors),
    )
    try:
        verdict = ams_mod.ams_verdict(trace, tail_fraction=tail, tol=tol)
        obj = _verdict_json(verdict)
    except TooFewCheckpoints:
        obj = {
            "status": "Inconclusive",
            "oscillation": None,
            "threshold": None,
            "tail_fraction": tail,
        }
    verdict_path = run.out_dir / f"{prefix}_verdict.json"
    _write_json(verdict_path, obj)
    print(f"wrote {trace_path} and {verdict_path}; status: {obj['status']}")
    return 0


def cmd_ams(run: Run) -> int:
    model = run.model()
    evs = run.eventualities()
    if len(evs) != 1:
        raise ConfigError("ams runs take exactly one eventuality")
    return _run_ams(run, model, evs[0], "ams")


def _suite_models(run: Run):
    if run.parser is None:
        return list(id_mod.DEFAULT_SUITE_MODELS)
    sections = sorted(
        s for s in run.parser.sections() if s.startswith("suite:model:")
    )
    if not sections:
        return list(id_mod.DEFAULT_SUITE_MODELS)
    out = []
    for s in sections:
        cfg = {k: v.strip().strip('"') for k, v in run.parser.items(s)}
        try:
            out.append(model_from_config(cfg))
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid model in section [{s}]: {exc}") from None
    return out


def cmd_suite(run: Run) -> int:
    models = _suite_models(run)
    battery_raw = run.get("eventualities")
    battery = None
    if battery_raw is not None:
        battery = run.eventualities()
    reports = id_mod.run_suite(
        models,
        run.reps,
        seed=run.seed,
        battery=battery if battery is not None else id_mod.SUITE_BATTERY,
        only=run.args.only or run.get("only"),
        horizon_gaps=run.horizon,
        threads=run.threads,
    )
    out = run.out_dir / "suite.csv"
    _write_csv(
        out,
        ["id", "model", "eventuality", "lhs", "lhs_se", "rhs", "rhs_se", "z", "verdict"],
        [
            [r.id, r.model, r.eventuality, r.lhs.value, r.lhs.std_error,
             r.rhs.value, r.rhs.std_error, r.z, r.verdict]
            for r in reports
        ],
    )
    failures = sum(1 for r in reports if r.verdict == "fail")
    low_ess = sum(
        1 for r in reports
        if 0 < r.lhs.ess < 0.1 * r.lhs.reps or 0 < r.rhs.ess < 0.1 * r.rhs.reps
    )
    print(f"wrote {out}: {len(reports)} checks, {failures} failures, "
          f"{low_ess} with low effective sample size")
    return 1 if failures else 0


def cmd_example44(run: Run) -> int:
    n_max = run.get_int("n_max", 256)
    pattern_len = run.get_int("pattern_len", max(3 * n_max + 80, 900))
    cfg = dict(run.cfg)
    cfg.update({"model": "example44", "pattern_len": str(pattern_len)})
    run.cfg = cfg
    run.cfg.setdefault("kind", "event")
    a = example44_run_lengths(7)
    b = example44_block_ends(7)
    rows = []
    for k in range(1, 8):
        m = example44_cesaro_exact(b[k - 1])
        rows.append([k, a[k - 1], b[k - 1], f"{m.numerator}/{m.denominator}"])
    exact_path = run.out_dir / "example44_exact.csv"
    _write_csv(exact_path, ["k", "run_length", "block_end", "cesaro_at_block_end"], rows)
    print(f"wrote {exact_path}")
    model = run.model()
    ev = parse_eventuality(run.get("eventuality", "alpha(0)==1"))
    return _run_ams(run, model, ev, "example44")


def cmd_example84(run: Run) -> int:
    from .models import example84_exact

    rate = run.get_float("rate", 1.0)
    model = example84_exact(rate)
    rows = []
    for x in (0.5, 1.0, 2.0):
        ev = parse_eventuality(f"alpha(0)>{x}")
        est = est_mod.est_event_probability(
            model, ev, run.reps, seed=run.seed, stream=f"e84:surv:{x}",
            horizon_gaps=run.horizon, threads=run.threads,
        )
        expected = float(np.exp(-rate * x) * ((rate * x) ** 2 / 2 + rate * x + 1))
        rows.append(["survival", ev.label, est.value, est.std_error, expected])
    half = 0.025 / rate
    for y in (0.0, -2.0 / rate, 2.0 / rate):
        prof = est_mod.est_intensity(
            model, np.array([y - half, y + half]), run.reps, seed=run.seed,
            stream=f"e84:rate:{y}", horizon_gaps=run.horizon, threads=run.threads,
        )
        expected = float(rate - rate * np.exp(-rate * abs(y)) / 2.0)
        rows.append([
            "intensity", f"x={y:g}", prof.values[0], prof.std_errors[0], expected,
        ])

    def ratio_kernel(batch, ctx):
        pos0, a0, ok = est_mod.straddle_gaps(batch, ctx)
        safe = np.clip(pos0, 0, max(batch.points.size - 2, 0))
        t1 = batch.points[safe + 1]
        return np.where(ok, t1 / a0, 0.0), ~ok

    def ratio_sq_kernel(batch, ctx):
        vals, reject = ratio_kernel(batch, ctx)
        return vals * vals, reject

    window = est_mod.guard_window(model, model.scale * run.horizon)
    m1 = est_mod.mc_mean(model, window, ratio_kernel, run.reps,
                         seed=run.seed, stream="e84:unif1", threads=run.threads)
    m2 = est_mod.mc_mean(model, window, ratio_sq_kernel, run.reps,
                         seed=run.seed, stream="e84:unif2", threads=run.threads)
    rows.append(["arrival_ratio", "E(T1/alpha0)", m1.value, m1.std_error, 0.5])
    rows.append(["arrival_ratio", "E((T1/alpha0)^2)", m2.value, m2.std_error, 1.0 / 3.0])
    out = run.out_dir / "example84.csv"
    _write_csv(out, ["quantity", "label", "value", "std_error", "expected"], rows)
    print(f"wrote {out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "palm": cmd_palm,
    "ams": cmd_ams,
    "suite": cmd_suite,
    "example44": cmd_example44,
    "example84": cmd_example84,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="palmlab",
        description="Monte Carlo toolkit for event-centered laws of point "
                    "processes on the line",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="path to the INI-style run configuration")
    parser.add_argument("--seed", type=int, help="root seed (beats PALMLAB_SEED)")
    parser.add_argument("--reps", type=int, help="replication budget")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--only", help="restrict the suite to one identity id")
    parser.add_argument("--threads", type=int, help="worker threads (default 1)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = Run(args.command, args)
        return COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PalmLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
