"""Command-line front end.

Every subcommand writes a JSON report (plus CSV files for sweeps) into the
output directory and prints the report to stdout.  Exit status: 0 when the
check passes, 1 when it was carried out and failed, 2 for usage or input
errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import mpmath

from . import _numeric
from ._numeric import Estimate, log_grid, render_rational, to_fraction, to_mpf
from .asymptotics import (
    DyadicB,
    LazySpectrum,
    dilation_sum_check,
    dixmier_envelope,
    parse_lazy,
    weighted_square_sum,
)
from .catalysis import (
    PMCheckFailed,
    l1_approximate,
    pm_check,
    search_catalyst,
    strict_lp_dominance,
    verify_catalysis,
)
from .spectra import (
    Spectrum,
    SpectrumFormatError,
    parse_spectrum,
    submajorizes,
    tensor,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class InputError(Exception):
    """Bad file or argument; reported with exit status 2."""


# ---------------------------------------------------------------------------
# configuration


def parse_grid(text: str, name: str, lo_min: float, hi_max: float = math.inf, strict_lo: bool = True):
    """Parse ``lo:hi:count`` into a log-spaced grid."""
    try:
        lo_s, hi_s, count_s = text.split(":")
        lo, hi, count = float(lo_s), float(hi_s), int(count_s)
    except ValueError as exc:
        raise InputError(f"--{name}: expected lo:hi:count, got {text!r}") from exc
    too_low = lo <= lo_min if strict_lo else lo < lo_min
    if too_low or hi > hi_max or hi < lo or count < 1:
        raise InputError(f"--{name}: {text!r} outside the allowed range ({lo_min}, {hi_max}]")
    return log_grid(lo, hi, count)


@dataclass
class RunConfig:
    command: str
    inputs: tuple = ()
    s_grid: list | None = None
    p_grid: list | None = None
    n_max: int = 8
    max_dim: int = 6
    budget: int = 20000
    seed: int = 0
    out: str = "catalens_out"
    precision: int = _numeric.DEFAULT_PREC
    margin: float = 0.05
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("s_grid", "p_grid"):
            grid = getattr(self, name)
            if grid is not None and not grid:
                raise InputError(f"{name} must be nonempty")
        if self.s_grid is not None and not all(0 < s <= 1 for s in self.s_grid):
            raise InputError("s grid must lie in (0, 1]")
        if self.p_grid is not None and not all(p > 1 for p in self.p_grid):
            raise InputError("p grid must lie in (1, inf)")
        if not 0 <= self.n_max <= 16:
            raise InputError("--n-max must lie in [0, 16]")
        if self.max_dim < 1 or self.budget < 1:
            raise InputError("--max-dim and --budget must be positive")
        if self.precision < 53:
            raise InputError("--precision must be at least 53 bits")
        if not self.margin > 0:
            raise InputError("--margin must be positive")

    def summary(self) -> dict:
        d = asdict(self)
        d["inputs"] = list(self.inputs)
        for name in ("s_grid", "p_grid"):
            g = d.pop(name)
            d[name] = None if g is None else {"lo": g[0], "hi": g[-1], "count": len(g)}
        return d


# ---------------------------------------------------------------------------
# report encoding


def _bound_pair(value, error) -> list:
    """``[value, bound]`` as doubles, with the bound widened to cover the conversion."""
    with _numeric.workprec():
        v = to_mpf(value)
        b = abs(to_mpf(error)) + abs(v) * mpmath.mpf(2) ** -52
        return [float(v), math.nextafter(float(b), math.inf)]


def encode(obj):
    """JSON-ready form: rationals as ``"n/d"``, inexact reals as ``[value, bound]``."""
    if isinstance(obj, Estimate):
        if obj.exact:
            return render_rational(obj.value)
        return _bound_pair(obj.value, obj.error)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, Fraction):
        return render_rational(obj)
    if isinstance(obj, mpmath.mpf):
        # bare high-precision values carry their rounding error
        return _bound_pair(obj, abs(obj) * mpmath.mpf(2) ** (8 - _numeric.DEFAULT_PREC))
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, Spectrum):
        return [render_rational(v) for v in obj.values]
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    raise TypeError(f"cannot encode {type(obj).__name__}")


def _csv_cell(v):
    if isinstance(v, Fraction):
        return render_rational(v)
    if isinstance(v, mpmath.mpf):
        return mpmath.nstr(v, 17)
    return v


def emit_report(name: str, report: dict, out_dir, csvs: dict | None = None) -> Path:
    """Write ``<name>.json`` and each ``csvs[stem] = (header, rows)`` as ``<stem>.csv``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for stem, (header, rows) in (csvs or {}).items():
            with open(out / f"{stem}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                for row in rows:
                    w.writerow([_csv_cell(v) for v in row])
        path = out / f"{name}.json"
        path.write_text(json.dumps(encode(report), indent=2) + "\n")
    except OSError as exc:
        raise InputError(f"cannot write to {out}: {exc.strerror or exc}") from exc
    return path


# ---------------------------------------------------------------------------
# inputs


def _load_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def load_spectrum(path: str) -> Spectrum:
    doc = _load_json(path)
    try:
        return parse_spectrum(doc)
    except SpectrumFormatError as exc:
        raise InputError(f"{path}: {exc}") from exc


def load_any(path: str):
    """Finite spectrum, or a lazy descriptor for any other ``type``."""
    doc = _load_json(path)
    if isinstance(doc, dict) and doc.get("type", "finite") != "finite":
        try:
            return parse_lazy(doc)
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"{path}: bad descriptor: {exc}") from exc
    try:
        return parse_spectrum(doc)
    except SpectrumFormatError as exc:
        raise InputError(f"{path}: {exc}") from exc


def parse_sequence(text: str) -> list:
    """``delta0``, ``chiI[:length]`` or a comma-separated list of rationals."""
    if text == "delta0":
        return [Fraction(1)]
    if text.startswith("chiI"):
        _, _, length = text.partition(":")
        try:
            n = int(length) if length else 64
        except ValueError as exc:
            raise InputError(f"--x: bad length in {text!r}") from exc
        if n < 1:
            raise InputError("--x: chiI length must be positive")
        return [Fraction(int(DyadicB.in_I(m))) for m in range(n)]
    vals = []
    for k, part in enumerate(text.split(",")):
        try:
            vals.append(to_fraction(part))
        except ValueError as exc:
            raise InputError(f"--x: entry {k}: {exc}") from exc
    return vals


# ---------------------------------------------------------------------------
# subcommands


def _margins_csv(rows):
    return (["p", "margin", "error_bound"], [(p, m, e) for p, m, e in rows])


def cmd_majorize(cfg: RunConfig):
    a, b = (load_spectrum(p) for p in cfg.inputs)
    res = submajorizes(a, b)
    report = {"holds": res.holds, "failure_index": res.index, "excess": res.excess, "a": a, "b": b}
    return report, {}, EXIT_OK if res else EXIT_FAILED


def cmd_tensor(cfg: RunConfig):
    a, c = (load_spectrum(p) for p in cfg.inputs)
    length = cfg.options.get("length")
    try:
        t = tensor(a, c, length)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report = {"length": len(t), "trace": t.trace, "values": t}
    return report, {"tensor": (["k", "mu"], list(enumerate(t.values)))}, EXIT_OK


def cmd_pm_check(cfg: RunConfig):
    a, b = (load_any(p) for p in cfg.inputs)
    rep = pm_check(a, b, grid=cfg.p_grid)
    report = {
        "verdict": rep.verdict,
        "failed_at": rep.failed_at,
        "exhaustive": rep.exhaustive,
        "sup_check": {"holds": rep.sup_check[0], "sup_a": rep.sup_check[1], "sup_b": rep.sup_check[2]},
        "total_check": None
        if rep.total_check is None
        else {"holds": rep.total_check[0], "trace_a": rep.total_check[1], "trace_b": rep.total_check[2]},
        "margins_csv": "pm_margins.csv",
    }
    return report, {"pm_margins": _margins_csv(rep.margins)}, EXIT_OK if rep.passed else EXIT_FAILED


def cmd_strict(cfg: RunConfig):
    a, b = (load_spectrum(p) for p in cfg.inputs)
    res = strict_lp_dominance(a, b, grid=cfg.p_grid)
    report = {
        "strict": res.strict,
        "label": res.label,
        "min_margin": res.min_margin,
        "min_at": res.min_at,
        "margins_csv": "strict_margins.csv",
    }
    return report, {"strict_margins": _margins_csv(res.checks)}, EXIT_OK if res.strict else EXIT_FAILED


def _certificate_report(cert):
    doc = cert.to_json()
    doc["first_violation"] = cert.first_violation
    doc["dimension"] = cert.dimension
    return doc


def cmd_find_catalyst(cfg: RunConfig):
    a, b = (load_spectrum(p) for p in cfg.inputs)
    outcome = search_catalyst(a, b, max_dim=cfg.max_dim, budget=cfg.budget, seed=cfg.seed)
    report = {"found": outcome.certificate is not None, "search_meta": outcome.meta}
    if outcome.certificate is None:
        report["note"] = "not found within budget; this is not a proof that no catalyst exists"
        return report, {}, EXIT_FAILED
    report["certificate"] = _certificate_report(outcome.certificate)
    return report, {}, EXIT_OK


def cmd_verify_catalyst(cfg: RunConfig):
    a, b, c = (load_spectrum(p) for p in cfg.inputs)
    try:
        cert = verify_catalysis(a, b, c)
    except ValueError as exc:
        raise InputError(f"{cfg.inputs[2]}: {exc}") from exc
    return _certificate_report(cert), {}, EXIT_OK if cert.valid else EXIT_FAILED


def cmd_l1_approximate(cfg: RunConfig):
    a, b = (load_any(p) for p in cfg.inputs)
    try:
        eps = to_fraction(cfg.options.get("eps", "1/10"))
    except ValueError as exc:
        raise InputError(f"--eps: {exc}") from exc
    if not 0 < eps < 1:
        raise InputError("--eps must lie strictly between 0 and 1")
    try:
        res = l1_approximate(a, b, eps, max_dim=cfg.max_dim, budget=cfg.budget, seed=cfg.seed, grid=cfg.p_grid)
    except PMCheckFailed as exc:
        return {"status": "pm check failed", "failed_at": exc.report.failed_at}, {}, EXIT_FAILED
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report = {
        "status": res.status,
        "n": res.n,
        "scale": res.scale,
        "eps": res.eps,
        "a_n": res.a_n,
        "b_scaled": res.b_scaled,
        "strict": {"strict": res.strict.strict, "label": res.strict.label, "min_margin": res.strict.min_margin},
        "distance": res.distance,
        "distance_bound": res.distance_bound,
        "certificate": None if res.certificate is None else _certificate_report(res.certificate),
    }
    return report, {}, EXIT_OK if res.certificate is not None else EXIT_FAILED


def cmd_dixmier(cfg: RunConfig):
    (spec,) = (load_any(p) for p in cfg.inputs)
    if not isinstance(spec, LazySpectrum):
        from .asymptotics import Finite

        spec = Finite.from_spectrum(spec)
    env = dixmier_envelope(
        spec,
        strategy=cfg.options.get("strategy", "auto"),
        max_bits=cfg.options.get("max_bits", 512),
    )
    rows = [(max(N, 1).bit_length(), x) for N, x in env.points]
    report = {
        "strategy": env.strategy,
        "lower": env.lower,
        "upper": env.upper,
        "lower_at_bits": env.lower_at.bit_length(),
        "upper_at_bits": env.upper_at.bit_length(),
        "diagnostics": env.diagnostics,
        "sweep_csv": "dixmier.csv",
    }
    code = EXIT_OK if env.diagnostics["bound_respected"] else EXIT_FAILED
    return report, {"dixmier": (["N_bits", "x_N"], rows)}, code


def cmd_identity(cfg: RunConfig):
    s_text = cfg.options.get("s", "1")
    try:
        s = to_fraction(s_text)
    except ValueError as exc:
        raise InputError(f"--s: {exc}") from exc
    if not s > 0:
        raise InputError("--s must be positive")
    s_arg = s if s.denominator == 1 else float(s)
    x = parse_sequence(cfg.options.get("x", "delta0"))
    chk = dilation_sum_check(x, s_arg)
    exact = isinstance(chk.lhs, Fraction)
    if exact:
        ok = chk.discrepancy == 0
        tol = Fraction(0)
    else:
        with _numeric.workprec():
            tol = mpmath.mpf(10) ** -10 * max(abs(chk.rhs), mpmath.mpf(1))
            ok = abs(chk.discrepancy) <= tol
    report = {
        "s": s,
        "x": x,
        "exact": exact,
        "lhs": chk.lhs,
        "rhs": chk.rhs,
        "discrepancy": chk.discrepancy,
        "tolerance": tol,
        "weighted_square_sum": weighted_square_sum(s_arg),
        "holds": bool(ok),
    }
    return report, {}, EXIT_OK if ok else EXIT_FAILED


def cmd_run_all(cfg: RunConfig):
    from .counterexample import lower_constant, run_all

    res = run_all(s_grid=cfg.s_grid, n_max=cfg.n_max, margin=cfg.margin)
    p, sw = res.params, res.sweep
    sweep_rows = [(s, v, e) for s, v, e in sw.points]
    lower_rows = [(r.N_bits, r.x) for r in res.lower]
    gap_rows = [(g.n, g.N_bits, g.x_B, g.x_A, g.gap, g.matched_gap) for g in res.gap.rows]
    d = res.density
    report = {
        "alpha": p.alpha,
        "delta": p.delta,
        "delta_label": "grid evidence: certified at grid points only",
        "norm_B": p.norm_B,
        "rank_one": p.rank_one,
        "bounds": {
            "upper": {
                "sweep_max": Estimate(sw.max_value, max((e for _, _, e in sw.points), default=0)),
                "argmax": sw.argmax,
                "constant": sw.bound,
                "below_alpha": bool(sw.max_value < to_mpf(p.alpha)),
            },
            "lower": {
                "limit": lower_constant(),
                "values": [{"n": r.n, "N_bits": r.N_bits, "numerator": r.numerator, "x": Estimate(r.x, abs(r.x) * r.log_error)} for r in res.lower],
            },
        },
        "pm_verification": {
            "ok": res.pm.ok,
            "points": len(res.pm.rows),
            "label": res.pm.label,
            "failures": [r.s for r in res.pm.failures],
        },
        "gap_table": {
            "margin": res.gap.margin,
            "witnessed_from": res.gap.witnessed_from,
            "rows": [
                {"n": g.n, "N_bits": g.N_bits, "x_B": g.x_B, "x_A": g.x_A, "gap": g.gap, "matched_gap": g.matched_gap}
                for g in res.gap.rows
            ],
        },
        "density_profile": {
            "maximizer": d.maximizer,
            "maximum": d.maximum,
            "at_two": list(d.at_two),
            "at_ends": list(d.at_ends),
            "derivative_at_max": d.derivative_at_max,
            "quadrature_error": d.quadrature_error,
            # integer double sums divided once in double precision
            "discrete_max": Estimate(d.discrete_max, d.discrete_max * 2.0**-52),
            "discrete_argmax": d.discrete_argmax,
            "near_attainment": {str(k): Estimate(v, v * 2.0**-52) for k, v in d.near_attainment.items()},
        },
        "sweep_csv_path": "sweep.csv",
        "lower_csv_path": "lower.csv",
        "ok": res.ok,
    }
    csvs = {
        "sweep": (["s", "value", "error_bound"], sweep_rows),
        "lower": (["N_bits", "x_N"], lower_rows),
        "gap": (["n", "N_bits", "x_B", "x_A", "gap", "matched_gap"], gap_rows),
        "density": (["t", "F"], d.samples),
    }
    return report, csvs, EXIT_OK if res.ok else EXIT_FAILED


COMMANDS = {
    "majorize": (cmd_majorize, 2),
    "tensor": (cmd_tensor, 2),
    "pm-check": (cmd_pm_check, 2),
    "strict-dominance": (cmd_strict, 2),
    "find-catalyst": (cmd_find_catalyst, 2),
    "verify-catalyst": (cmd_verify_catalyst, 3),
    "l1-approximate": (cmd_l1_approximate, 2),
    "dixmier-estimate": (cmd_dixmier, 1),
    "identity-check": (cmd_identity, 0),
    "counterexample run-all": (cmd_run_all, 0),
}


def dispatch(cfg: RunConfig, stdout=None) -> int:
    """Run one subcommand, write its artifacts and return the exit status."""
    stdout = stdout or sys.stdout
    handler, arity = COMMANDS[cfg.command]
    if len(cfg.inputs) != arity:
        raise InputError(f"{cfg.command} takes {arity} input file(s), got {len(cfg.inputs)}")
    saved = _numeric.DEFAULT_PREC
    _numeric.set_precision(cfg.precision)
    try:
        report, csvs, code = handler(cfg)
    finally:
        _numeric.set_precision(saved)
    report = {"command": cfg.command, "exit_status": code, "config": cfg.summary(), **report}
    name = cfg.command.replace("counterexample ", "").replace("-", "_")
    emit_report(name, report, cfg.out, csvs)
    stdout.write(json.dumps(encode(report), indent=2) + "\n")
    return code


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="catalens_out", help="output directory (CATALENS_OUT overrides)")
    common.add_argument("--precision", type=int, default=_numeric.DEFAULT_PREC, metavar="BITS")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--s-grid", metavar="LO:HI:COUNT", help="log-spaced s grid inside (0, 1]")
    common.add_argument("--p-grid", metavar="LO:HI:COUNT", help="log-spaced p grid above 1")
    common.add_argument("--n-max", type=int, default=8)
    common.add_argument("--max-dim", type=int, default=6)
    common.add_argument("--budget", type=int, default=20000)
    common.add_argument("--margin", type=float, default=0.05)

    parser = argparse.ArgumentParser(prog="catalens", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, files, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text)
        for f in files:
            sp.add_argument(f, help="spectrum JSON file")
        return sp

    add("majorize", ["a", "b"], "is b submajorized by a?")
    add("tensor", ["a", "c"], "singular values of a ⊗ c").add_argument("--length", type=int)
    add("pm-check", ["a", "b"], "power-trace comparison Tr(b^p) <= Tr(a^p)")
    add("strict-dominance", ["a", "b"], "strict Schatten-norm dominance on a grid")
    add("find-catalyst", ["a", "b"], "search for a catalyst c")
    add("verify-catalyst", ["a", "b", "c"], "exact check of b ⊗ c ≺≺ a ⊗ c")
    add("l1-approximate", ["a", "b"], "truncate, shrink and catalyse").add_argument("--eps", default="1/10")
    dx = add("dixmier-estimate", ["spectrum"], "log-average envelope of a lazy spectrum")
    dx.add_argument("--strategy", choices=["auto", "blocks", "dyadic"], default="auto", metavar="auto|blocks|dyadic")
    dx.add_argument("--max-bits", type=int, default=512)
    ic = add("identity-check", [], "double prefix-sum identity")
    ic.add_argument("--s", default="1")
    ic.add_argument("--x", default="delta0", help="delta0, chiI[:length] or a comma list")

    ce = sub.add_parser("counterexample", help="the weak-trace-class counterexample")
    ce_sub = ce.add_subparsers(dest="action", required=True)
    ce_sub.add_parser("run-all", parents=[common], help="run every verification and write the report")
    return parser


def config_from_args(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    command = args.command
    if command == "counterexample":
        command = f"counterexample {args.action}"
    inputs = tuple(getattr(args, f) for f in ("a", "b", "c", "spectrum") if getattr(args, f, None) is not None)
    if command == "tensor":
        inputs = (args.a, args.c)
    options = {
        k: getattr(args, k)
        for k in ("length", "eps", "strategy", "max_bits", "s", "x")
        if getattr(args, k, None) is not None
    }
    s_grid = parse_grid(args.s_grid, "s-grid", 0.0, 1.0) if args.s_grid else None
    p_grid = parse_grid(args.p_grid, "p-grid", 1.0) if args.p_grid else None
    return RunConfig(
        command=command,
        inputs=inputs,
        s_grid=s_grid,
        p_grid=p_grid,
        n_max=args.n_max,
        max_dim=args.max_dim,
        budget=args.budget,
        seed=args.seed,
        out=os.environ.get("CATALENS_OUT") or args.out,
        precision=args.precision,
        margin=args.margin,
        options=options,
    )


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
        return dispatch(cfg)
    except InputError as exc:
        print(f"catalens: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse usage errors
        return EXIT_USAGE if exc.code else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
