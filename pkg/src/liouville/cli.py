"""Command-line front end.

Every run writes its result together with a ``config`` block that echoes all
effective parameters and the library version, so a run can be repeated from
its own output.  Wall-clock time only ever goes to a ``<out>.meta.json``
sidecar, keeping the main artifact bit-identical across repeated runs.

Exit codes: 0 success, 2 inconclusive (or a check that did not pass),
1 error.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import Outcome, ProblemSpec, classify, decay_curve, mean_bound
from .harness import (
    Lemma34Case,
    LemmaReport,
    lemma31_ratio,
    lemma33_sequence,
    lemma34_check,
    lemma35_check,
)
from .nonlinearity import ParseError, parse
from .quadrature import InconclusiveError, big_G_table
from .simulator import ProfileStatus, integrate_radial, verify_counterexample

__all__ = ["main", "run", "dumps"]

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2
SWEEPABLE = ("lambda", "nu", "u0", "k")


# --------------------------------------------------------------------------
# serialisation


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _plain(obj):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits and inf/nan as strings."""
    obj = _plain(obj)
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(_plain(v), (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        items = [inner + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _floats(text) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _grid(text: str) -> np.ndarray:
    """``a:b:count`` for a linear grid, otherwise a comma list."""
    if ":" in text:
        a, b, c = text.split(":")
        return np.linspace(float(a), float(b), int(c))
    return np.array(_floats(text))


# --------------------------------------------------------------------------
# commands; each takes a plain dict of parameters and returns (payload, code)


def _spec(p: dict) -> ProblemSpec:
    if not p.get("g"):
        raise ValueError("--g is required for this command")
    return ProblemSpec(p["m"], p["n"], parse(p["g"]), p["A"])


def _cmd_classify(p):
    verdict = classify(_spec(p), p["tol"])
    code = EXIT_INCONCLUSIVE if verdict.outcome is Outcome.INCONCLUSIVE else EXIT_OK
    return verdict.to_dict(), code


def _cmd_g_table(p):
    spec = _spec(p)
    table = big_G_table(spec.g, spec.m, p["t_min"], p["t_max"], p["count"], p["tol"])
    if p["format"] == "csv":
        return table.to_csv(), EXIT_OK
    return table.to_dict(), EXIT_OK


def _cmd_bound(p):
    spec = _spec(p)
    radii = _floats(p["r"])
    if len(radii) == 1:
        value = mean_bound(spec, radii[0], p["C"], p["k"], p["tol"])
        if p["format"] == "csv":
            return f"r,bound\n{radii[0]:.17g},{value:.17g}\n", EXIT_OK
        return {"r": radii[0], "C": p["C"], "k": p["k"], "bound": value}, EXIT_OK
    table = decay_curve(spec, radii, p["C"], p["k"], p.get("epsilon"), p["tol"])
    return (table.to_csv() if p["format"] == "csv" else table.to_dict()), EXIT_OK


def _cmd_simulate(p):
    spec = _spec(p)
    initial = _floats(p["initial"]) if p.get("initial") else None
    prof = integrate_radial(spec, p["u0"], p["r_max"], initial=initial, rtol=p["rtol"])
    code = EXIT_INCONCLUSIVE if prof.status is ProfileStatus.ABORTED else EXIT_OK
    if p["format"] == "csv":
        return prof.to_csv(), code, {"header": prof.header()}
    h = spec.m // 2
    columns = {"r": prof.grid, "u": prof.values}
    for j in range(1, h):
        columns[f"v_{j}"] = prof.derivative_stack[j]
    return {"header": prof.header(), "columns": columns}, code


def _cmd_verify(p):
    if p["m"] % 2:
        raise ValueError("verify-example needs an even --m")
    k = p["k"] if p["k"] == "auto" else float(p["k"])
    rep = verify_counterexample(p["m"] // 2, p["n"], p["nu"], p["c0"], k,
                                _grid(p["r_grid"]), p["k_max"])
    if p["format"] == "csv":
        rows = ["r,scaled_residual,residual"] + [
            f"{a:.17g},{b:.17g},{c:.17g}"
            for a, b, c in zip(rep.r_grid, rep.scaled_residual, rep.residual)]
        summary = rep.to_dict()
        for key in ("r_grid", "scaled_residual", "residual"):
            summary.pop(key)
        return "\n".join(rows) + "\n", EXIT_OK, {"summary": summary}
    return rep.to_dict(), EXIT_OK


def _harness_profile(p):
    spec = _spec(p)
    prof = integrate_radial(spec, p["u0"], p["r_max"])
    scale = prof.blowup_radius if prof.blowup_radius else prof.r_end
    if p.get("r"):
        radii = _floats(p["r"])
    else:
        radii = [f * scale for f in _floats(p["r_frac"])]
    return spec, prof, radii


def _summary(constants, reports):
    c = np.array([x for x in constants if x is not None], dtype=float)
    ok = bool(c.size and np.all(c > 0) and c.max() / c.min() < 100)
    return {"empirical_constants": c, "min": float(c.min()) if c.size else None,
            "max": float(c.max()) if c.size else None,
            "spread": float(c.max() / c.min()) if c.size and c.min() > 0 else None,
            "pass": ok, "reports": reports}, (EXIT_OK if ok else EXIT_INCONCLUSIVE)


def _cmd_harness(p):
    lemma = p["lemma"]
    if lemma == "34":
        case = Lemma34Case(p["psi"], p["gamma"], p["theta"], p["alpha"], p["nu"],
                           p["M1"], p["M2"])
        rep = lemma34_check(case)
        return rep.to_dict(), EXIT_OK if rep.passed else EXIT_INCONCLUSIVE
    spec, prof, radii = _harness_profile(p)
    profile_info = {"status": prof.status.value, "blowup_radius": prof.blowup_radius}
    if lemma == "31":
        reports = []
        for r in radii:
            r1, r2 = (p["r1"], p["r2"]) if p.get("r1") and p.get("r2") else (r / 2, r)
            c = lemma31_ratio(prof, spec, r1, r2)
            reports.append(LemmaReport("annulus", {"r1": r1, "r2": r2}, c, c > 0))
    elif lemma == "33":
        reports = [lemma33_sequence(prof, r, spec, p["tol"]).report() for r in radii]
    else:
        reports = [lemma35_check(prof, spec, r, p["tol"]) for r in radii]
    payload, code = _summary([rep.empirical_constant for rep in reports],
                             [rep.to_dict() for rep in reports])
    payload["profile"] = profile_info
    return payload, code


COMMANDS = {
    "classify": _cmd_classify,
    "g-table": _cmd_g_table,
    "bound": _cmd_bound,
    "simulate": _cmd_simulate,
    "verify-example": _cmd_verify,
    "harness": _cmd_harness,
}


def _execute(params: dict):
    """Run one job; returns ``(payload, exit code, extra, error message)``."""
    try:
        out = COMMANDS[params["command"]](params)
    except ParseError as exc:
        return None, EXIT_ERROR, None, f"syntax error: {exc}"
    except InconclusiveError as exc:
        return {"inconclusive": str(exc)}, EXIT_INCONCLUSIVE, None, None
    except (ValueError, ArithmeticError, TypeError) as exc:
        return None, EXIT_ERROR, None, str(exc)
    payload, code = out[0], out[1]
    extra = out[2] if len(out) > 2 else None
    return payload, code, extra, None


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--g", help="nonlinearity in the variable zeta, e.g. 'zeta^2'")
    common.add_argument("--m", type=int, default=2, help="operator order (default 2)")
    common.add_argument("--n", type=int, default=3, help="dimension (default 3)")
    common.add_argument("--A", type=float, default=1.0, help="coefficient bound (default 1)")
    common.add_argument("--tol", type=float, default=1e-9, help="relative tolerance (default 1e-9)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for --sweep")
    common.add_argument("--sweep", help="NAME=v1,v2,... with NAME in lambda, nu, u0, k; "
                        "lambda and nu fill {lambda}/{nu} placeholders in --g")

    parser = _Parser(prog="liouville", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("classify", parents=[common], help="run the condition battery")

    gt = sub.add_parser("g-table", parents=[common], help="tabulate G on a log grid")
    gt.add_argument("--t-min", type=float, default=1e-3)
    gt.add_argument("--t-max", type=float, default=1e3)
    gt.add_argument("--count", type=int, default=13)

    bd = sub.add_parser("bound", parents=[common], help="C * G^-1(k r), one radius or a list")
    bd.add_argument("--r", default="10", help="radius or comma list (default 10)")
    bd.add_argument("--C", type=float, default=1.0)
    bd.add_argument("--k", type=float, default=1.0)
    bd.add_argument("--epsilon", type=float, default=None)

    sm = sub.add_parser("simulate", parents=[common], help="shoot the radial equation")
    sm.add_argument("--u0", type=float, default=1.0)
    sm.add_argument("--r-max", type=float, default=10.0)
    sm.add_argument("--initial", default=None, help="comma list of Delta^j u(0), j >= 1")
    sm.add_argument("--rtol", type=float, default=1e-12)

    ve = sub.add_parser("verify-example", parents=[common],
                        help="residual of the double-exponential counterexample")
    ve.add_argument("--nu", type=float, default=2.0)
    ve.add_argument("--c0", type=float, default=1.0)
    ve.add_argument("--k", default="auto", help="positive real or 'auto' (default)")
    ve.add_argument("--k-max", type=float, default=2.0 ** 20)
    ve.add_argument("--r-grid", default="0:8:801", help="a:b:count or comma list")

    hs = sub.add_parser("harness", parents=[common], help="lemma checks on simulated profiles")
    hs.add_argument("--lemma", choices=("31", "33", "34", "35"), required=True)
    hs.add_argument("--u0", type=float, default=1.0)
    hs.add_argument("--r-max", type=float, default=50.0)
    hs.add_argument("--r", default=None, help="comma list of radii")
    hs.add_argument("--r-frac", default="0.25,0.35,0.45",
                    help="radii as fractions of the blow-up radius (default 0.25,0.35,0.45)")
    hs.add_argument("--r1", type=float, default=None)
    hs.add_argument("--r2", type=float, default=None)
    hs.add_argument("--psi", default="zeta^2")
    hs.add_argument("--gamma", default="0.25*zeta^2")
    hs.add_argument("--theta", type=float, default=2.0)
    hs.add_argument("--alpha", type=float, default=0.5)
    hs.add_argument("--nu", type=float, default=2.0)
    hs.add_argument("--M1", type=float, default=1.0)
    hs.add_argument("--M2", type=float, default=4.0)
    return parser


def _sweep_jobs(params: dict):
    name, _, values = params["sweep"].partition("=")
    name = name.strip()
    if name not in SWEEPABLE:
        raise ValueError(f"cannot sweep {name!r}; choose from {', '.join(SWEEPABLE)}")
    raw = [v.strip() for v in values.split(",") if v.strip()]
    if not raw:
        raise ValueError("--sweep needs at least one value")
    jobs = []
    for v in raw:
        job = dict(params, sweep=None)
        placeholder = "{" + name + "}"
        if job.get("g") and placeholder in job["g"]:
            job["g"] = job["g"].replace(placeholder, v)
        elif name in job:
            job[name] = v if name == "k" else float(v)
        else:
            raise ValueError(f"{name} is neither a placeholder in --g nor a flag of "
                             f"{params['command']}")
        jobs.append((v, job))
    return name, jobs


def _write(params: dict, text: str, sidecar: dict | None) -> None:
    out = params.get("out")
    if not out:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    path = Path(out)
    path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    if sidecar is not None:
        Path(f"{out}.config.json").write_text(dumps(sidecar) + "\n", encoding="utf-8")
    meta = {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "note": "wall-clock data, excluded from comparisons"}
    Path(f"{out}.meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def run(argv=None) -> int:
    """Parse ``argv``, execute, write artifacts and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    params = vars(args)
    config = dict(params, version=__version__)

    if params.get("sweep"):
        try:
            name, jobs = _sweep_jobs(params)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        if params["format"] == "csv":
            print("error: sweeps emit JSON only", file=sys.stderr)
            return EXIT_ERROR
        workers = max(1, params["jobs"])
        job_params = [j for _, j in jobs]
        if workers == 1:
            results = [_execute(j) for j in job_params]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_execute, job_params))
        entries, codes = [], []
        for (value, _), (payload, code, extra, err) in zip(jobs, results):
            entry = {"value": value, "exit_code": code}
            if err:
                entry["error"] = err
            else:
                entry["result"] = payload
                if extra:
                    entry.update(extra)
            entries.append(entry)
            codes.append(code)
        _write(params, dumps({"config": config, "sweep": {"name": name}, "results": entries}),
               None)
        if EXIT_ERROR in codes:
            return EXIT_ERROR
        return EXIT_INCONCLUSIVE if EXIT_INCONCLUSIVE in codes else EXIT_OK

    if params["format"] == "csv" and params["command"] in ("classify", "harness"):
        print(f"error: {params['command']} emits JSON only", file=sys.stderr)
        return EXIT_ERROR
    payload, code, extra, err = _execute(params)
    if err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR
    try:
        if isinstance(payload, str):
            _write(params, payload, dict({"config": config}, **(extra or {})))
            if not params.get("out") and extra:
                sys.stderr.write(dumps(dict({"config": config}, **extra)) + "\n")
        else:
            doc = {"config": config, "result": payload}
            if extra:
                doc.update(extra)
            _write(params, dumps(doc), None)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return code


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
