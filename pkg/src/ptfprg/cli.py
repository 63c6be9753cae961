"""Command-line front end: ``ptfprg params | gen | report``.

Exit codes: 0 success / all verdicts pass, 1 some verdict failed, 2 usage or
input error.  Every command can be replayed from the JSON written by
``--save-config`` (or embedded in report files) via ``--config``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, generator, harness
from .errors import SeedUnderflowError
from .quadratic import random_quadratic

DESK = {"n": 16, "delta": 0.25, "ell": 64, "delta1": 2.0 ** -20, "M": 24}
SUITES = ("standard", "onestep", "decomposition", "fooling", "bounds")
ONESTEP_DELTAS = (0.4, 0.2, 0.1)
DECOMP_N = 64
DECOMP_DELTA = 0.1
DECOMP_KAPPA = 0.25
DECOMP_RS = (5, 10, 20)
DECOMP_POLYS = 3
ANTICONC_EPS = (1e-4, 1e-3, 1e-2, 1e-1)
CONC_N = (2, 4, 6)
SWEEP = (2 ** 4, 2 ** 10, 2 ** 16, 2 ** 20)


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    n: int | None = None
    epsilon: float | None = None
    C: float = 1.0
    delta: float | None = None
    ell: int | None = None
    delta1: float | None = None
    delta2: float | None = None
    M: int | None = None
    trials: int | None = None
    seed: int = 0
    seed_hex: str | None = None
    count: int = 1
    format: str = "csv"
    suite: str | None = None
    out: str | None = None
    out_dir: str | None = None
    sweep: tuple | None = None
    json: bool = False

    def to_json(self):
        d = asdict(self)
        if d["sweep"] is not None:
            d["sweep"] = list(d["sweep"])
        return d

    @classmethod
    def from_json(cls, obj):
        names = {f.name for f in fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise UsageError(f"unknown experiment config keys: {sorted(unknown)}")
        obj = dict(obj)
        if obj.get("sweep") is not None:
            obj["sweep"] = tuple(obj["sweep"])
        return cls(**obj)

    @property
    def empirical(self):
        return any(getattr(self, k) is not None for k in ("delta", "ell", "delta1", "delta2", "M"))

    def generator_config(self):
        n = self.n if self.n is not None else DESK["n"]
        if self.epsilon is not None and not self.empirical:
            return generator.derive_params(n, self.epsilon, self.C)
        pick = lambda k: getattr(self, k) if getattr(self, k) is not None else DESK[k]  # noqa: E731
        return generator.empirical_params(n, pick("delta"), pick("ell"), pick("delta1"),
                                          pick("M"), delta2=self.delta2)


# --------------------------------------------------------------------------
# Helpers


def _trials(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v.is_integer() or v < 1:
        raise argparse.ArgumentTypeError(f"trials must be a positive integer, got {text!r}")
    return int(v)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def _fmt(x):
    return repr(float(x))


def _write(path, data, stdout):
    if path is None or path == "-":
        if isinstance(data, bytes):
            stdout.buffer.write(data) if hasattr(stdout, "buffer") else stdout.write(data.hex())
        else:
            stdout.write(data)
        return
    Path(path).write_bytes(data if isinstance(data, bytes) else data.encode())


# --------------------------------------------------------------------------
# params


def _param_row(cfg):
    formula = generator.asymptotic_seed_formula(cfg.n, cfg.epsilon)
    return {
        "n": cfg.n, "delta": cfg.delta, "ell": cfg.ell, "M": cfg.M, "block_bits": cfg.block_bits,
        "k": cfg.k, "seed_bits": cfg.seed_length, "formula": formula,
        "ratio": cfg.seed_length / formula if formula > 0 else None,
    }


def cmd_params(exp, stdout):
    if exp.epsilon is None:
        raise UsageError("params requires --epsilon")
    n = exp.n if exp.n is not None else DESK["n"]
    cfg = generator.derive_params(n, exp.epsilon, exp.C)
    sweep = sorted(set(exp.sweep or SWEEP) | {n})
    rows = [_param_row(generator.derive_params(m, exp.epsilon, exp.C)) for m in sweep]
    if exp.json:
        stdout.write(dumps({"config": cfg.to_json(), "config_sha256": cfg.digest(),
                            "seed_layout": cfg.seed_layout(), "sweep": rows}))
        return 0
    stdout.write(f"# ptfprg {__version__} params  config_sha256={cfg.digest()}\n")
    for key, val in cfg.to_json().items():
        if key not in ("weights", "seed_layout"):
            stdout.write(f"{key:>20} = {val}\n")
    stdout.write(f"{'seed_length':>20} = {cfg.seed_length}\n\n")
    stdout.write("seed length vs log(1/eps)^6 log(n) loglog(n/eps)\n")
    head = f"{'n':>9} {'delta':>8} {'ell':>6} {'M':>5} {'m':>3} {'k':>3} {'seed_bits':>11} " \
           f"{'formula':>12} {'ratio':>9}\n"
    stdout.write(head)
    for r in rows:
        ratio = f"{r['ratio']:9.3f}" if r["ratio"] is not None else f"{'-':>9}"
        stdout.write(f"{r['n']:>9} {r['delta']:8.4f} {r['ell']:>6} {r['M']:>5} "
                     f"{r['block_bits']:>3} {r['k']:>3} {r['seed_bits']:>11} "
                     f"{r['formula']:12.4g} {ratio}\n")
    return 0


# --------------------------------------------------------------------------
# gen


def _gen_samples(exp, cfg):
    if exp.seed_hex is not None:
        if exp.count != 1:
            raise UsageError("--seed-hex defines exactly one sample; drop --count")
        try:
            seed = bytes.fromhex(exp.seed_hex)
        except ValueError as e:
            raise UsageError(f"bad --seed-hex: {e}") from None
        return generator.sample(cfg, seed)[None, :]
    if exp.count < 1:
        raise UsageError("--count must be positive")
    return harness.draw(harness.GeneratorSampler(cfg), exp.count, exp.seed)


def _header(exp, cfg):
    return {"tool": "ptfprg", "version": __version__, "mode": cfg.mode,
            "config_sha256": cfg.digest(), "seed": exp.seed, "seed_hex": exp.seed_hex,
            "count": exp.count, "n": cfg.n}


def cmd_gen(exp, stdout):
    cfg = exp.generator_config()
    Y = _gen_samples(exp, cfg)
    head = _header(exp, cfg)
    if exp.format == "csv":
        buf = io.StringIO()
        for key in sorted(head):
            buf.write(f"# {key}: {head[key]}\n")
        buf.write(",".join(f"y{i + 1}" for i in range(cfg.n)) + "\n")
        for row in Y:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        _write(exp.out, buf.getvalue(), stdout)
    elif exp.format == "json":
        _write(exp.out, dumps({**head, "config": cfg.to_json(),
                               "experiment": {**exp.to_json(), "out": None},
                               "samples": Y.tolist()}), stdout)
    else:
        if exp.out is None or exp.out == "-":
            raise UsageError("--format binary needs --out FILE (a .json sidecar is written next to it)")
        _write(exp.out, np.ascontiguousarray(Y, dtype="<f8").tobytes(), stdout)
        side = {**head, "config": cfg.to_json(), "experiment": {**exp.to_json(), "out": None},
                "dtype": "float64", "byteorder": "little", "shape": list(Y.shape)}
        _write(exp.out + ".json", dumps(side), stdout)
    return 0


# --------------------------------------------------------------------------
# report


def _suite_standard(exp, cfg, trials):
    suite = harness.standard_suite(cfg.n)
    rows = [r.row() for r in harness.discrepancy_report(cfg, suite, trials, exp.seed)]
    return rows, {"cases": harness.suite_digest(suite)}, {"systematic_gap": harness.SYSTEMATIC_GAP}


def _suite_onestep(exp, cfg, trials):
    suite = harness.standard_suite(cfg.n)
    rows = []
    for d in ONESTEP_DELTAS:
        oc = harness.onestep_config(d, n=cfg.n, delta1=cfg.delta1, M=cfg.M)
        rows.extend(r.row() for r in harness.test_one_step(suite, oc, trials, exp.seed))
    return rows, {"cases": harness.suite_digest(suite)}, {
        "systematic_gap": harness.SYSTEMATIC_GAP, "deltas": list(ONESTEP_DELTAS)}


def decomposition_polys(seed=0, n=DECOMP_N, count=DECOMP_POLYS):
    rng = np.random.default_rng([seed, 8])
    return [(f"random_dense_{i}", random_quadratic(rng, n)) for i in range(count)]


def _suite_decomposition(exp, cfg, trials):
    rows = []
    polys = decomposition_polys(exp.seed)
    for name, p in polys:
        res = [harness.test_decomposition(p, DECOMP_DELTA, r, DECOMP_KAPPA, trials, exp.seed)
               for r in DECOMP_RS]
        trend = harness.nonincreasing_within(res)
        for x in res:
            ok = trend and (x.r != max(DECOMP_RS) or
                            x.failure_fraction <= harness.DECOMP_FAILURE_BOUND)
            rows.append({"poly": name, "r": x.r, "delta": x.delta, "kappa": x.kappa,
                         "trials": x.trials, "failures": x.failures,
                         "failure_fraction": x.failure_fraction, "stderr": x.stderr,
                         "ratio_threshold": x.threshold, "nonincreasing": trend, "passed": ok})
    digest = hashlib.sha256(dumps([p.to_json() for _, p in polys]).encode()).hexdigest()
    return rows, {"polys": digest}, {"failure_bound": harness.DECOMP_FAILURE_BOUND,
                                     "ratio_factor": harness.DECOMP_RATIO_FACTOR}


def _suite_fooling(exp, cfg, trials):
    rows = []
    triples = harness.fooling_triples(cfg.n)
    for name, s, interval, q in triples:
        rep = harness.test_indicator_poly_fooling(s, interval, q, cfg, trials, exp.seed, name)
        rows.append(asdict(rep))
    blob = dumps([[name, s.to_json(), [repr(interval[0]), repr(interval[1])],
                   sorted((repr(k), v) for k, v in q.items())] for name, s, interval, q in triples])
    return rows, {"triples": hashlib.sha256(blob.encode()).hexdigest()}, {
        "systematic_gap": harness.SYSTEMATIC_GAP}


def _suite_bounds(exp, cfg, trials):
    polys = harness.bounds_polys()
    X = harness.draw(harness.GaussianSampler(polys[0][1].dim), trials, exp.seed)
    rows = []
    for name, p in polys:
        rows.extend(asdict(b) for b in harness.test_anticoncentration(
            p, ANTICONC_EPS, trials, samples=X, name=name))
        rows.extend(asdict(b) for b in harness.test_concentration(
            p, CONC_N, trials, samples=X, name=name))
    digest = hashlib.sha256(dumps([p.to_json() for _, p in polys]).encode()).hexdigest()
    return rows, {"polys": digest}, {"anticoncentration_const": harness.ANTICONC_CONST,
                                     "concentration_const": harness.CONC_CONST}


_RUNNERS = {
    "standard": _suite_standard,
    "onestep": _suite_onestep,
    "decomposition": _suite_decomposition,
    "fooling": _suite_fooling,
    "bounds": _suite_bounds,
}
DEFAULT_TRIALS = {"standard": 100_000, "onestep": 100_000, "decomposition": 10_000,
                  "fooling": 100_000, "bounds": 1_000_000}


def _rows_csv(rows, head):
    buf = io.StringIO()
    for key in sorted(head):
        buf.write(f"# {key}: {head[key]}\n")
    cols = list(rows[0].keys()) if rows else []
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) if isinstance(v, (float, np.floating)) else v for k, v in r.items()})
    return buf.getvalue()


def run_report(exp):
    """Run ``exp.suite`` and return the report dict (without writing anything)."""
    if exp.suite not in _RUNNERS:
        raise UsageError(f"unknown suite {exp.suite!r}; choose from {', '.join(SUITES)}")
    cfg = exp.generator_config()
    trials = exp.trials if exp.trials is not None else DEFAULT_TRIALS[exp.suite]
    rows, digests, tolerances = _RUNNERS[exp.suite](exp, cfg, trials)
    rows = [_plain(r) for r in rows]
    return {
        "tool": "ptfprg", "version": __version__, "suite": exp.suite, "trials": trials,
        "seed": exp.seed, "config": cfg.to_json(), "config_sha256": cfg.digest(),
        "content_sha256": digests, "tolerances": tolerances,
        "stat_width": harness.STAT_WIDTH, "experiment": {**exp.to_json(), "out_dir": None},
        "rows": rows,
        "passed": all(bool(r["passed"]) for r in rows),
    }


def cmd_report(exp, stdout):
    report = run_report(exp)
    out = Path(exp.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    stem = out / f"report_{exp.suite}"
    head = {"tool": "ptfprg", "version": __version__, "suite": exp.suite,
            "config_sha256": report["config_sha256"], "trials": report["trials"],
            "seed": exp.seed}
    Path(f"{stem}.csv").write_text(_rows_csv(report["rows"], head))
    Path(f"{stem}.json").write_text(dumps(report))
    failed = [r for r in report["rows"] if not r["passed"]]
    stdout.write(f"{exp.suite}: {len(report['rows']) - len(failed)}/{len(report['rows'])} "
                 f"passed -> {stem}.csv, {stem}.json\n")
    for r in failed:
        stdout.write(f"  FAIL {json.dumps(_plain(r), sort_keys=True)}\n")
    return 0 if report["passed"] else 1


# --------------------------------------------------------------------------
# Entry point


def build_parser():
    p = argparse.ArgumentParser(prog="ptfprg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ptfprg {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="replay a serialized experiment config (JSON)")
        sp.add_argument("--save-config", help="write the experiment config to this file")
        sp.add_argument("--n", type=int)
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--C", type=float, default=1.0)

    def empirical(sp):
        g = sp.add_argument_group("empirical mode (bypasses derived parameters)")
        g.add_argument("--delta", type=float)
        g.add_argument("--ell", type=int)
        g.add_argument("--delta1", type=float)
        g.add_argument("--delta2", type=float)
        g.add_argument("--M", type=int)

    sp = sub.add_parser("params", help="derived parameters and seed-length table")
    common(sp)
    sp.add_argument("--sweep", type=lambda s: tuple(int(x) for x in s.split(",")),
                    help="comma-separated n values for the table")
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("gen", help="emit generator samples")
    common(sp)
    empirical(sp)
    sp.add_argument("--count", type=_trials, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--seed-hex", help="one explicit master seed, hex, big-endian bits")
    sp.add_argument("--format", choices=("csv", "json", "binary"), default="csv")
    sp.add_argument("--out")

    sp = sub.add_parser("report", help="run an experiment suite")
    common(sp)
    empirical(sp)
    sp.add_argument("--suite", choices=SUITES, default="standard")
    sp.add_argument("--trials", type=_trials)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out-dir")
    return p


def _experiment(ns, parser):
    if ns.config:
        try:
            obj = json.loads(Path(ns.config).read_text())
        except (OSError, ValueError) as e:
            parser.error(f"cannot read --config: {e}")
        obj = obj.get("experiment", obj)
        if obj.get("command") != ns.command:
            parser.error(f"--config holds a {obj.get('command')!r} experiment, not {ns.command!r}")
        exp = ExperimentConfig.from_json(obj)
        for key in ("out", "out_dir"):
            if getattr(ns, key, None) is not None:
                setattr(exp, key, getattr(ns, key))
        return exp
    keep = {f.name for f in fields(ExperimentConfig)}
    vals = {k: v for k, v in vars(ns).items() if k in keep}
    return ExperimentConfig(**vals)


_COMMANDS = {"params": cmd_params, "gen": cmd_gen, "report": cmd_report}


def main(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "params" and ns.epsilon is None and not ns.config:
        parser.error("params: the following arguments are required: --epsilon")
    try:
        exp = _experiment(ns, parser)
        if getattr(ns, "save_config", None):
            Path(ns.save_config).write_text(dumps(exp.to_json()))
        return _COMMANDS[exp.command](exp, stdout)
    except SeedUnderflowError as e:
        sys.stderr.write(f"ptfprg: seed underflow in family {e.family}: {e}\n")
        return 2
    except (UsageError, ValueError) as e:
        sys.stderr.write(f"ptfprg: {e}\n")
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
