"""Command-line front end.

Each subcommand prints its main result on stdout (JSON or CSV) and, given
``--out PREFIX``, also writes the full set of files under that prefix.
Exit status: 0 on success, 1 for invalid input, 2 for a numerical failure
(a ``PREFIX_diagnostics.json`` file records what went wrong).
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from . import acceptance
from . import evolution as ev
from .fiber import E1, default_L_values, fiber, fiber_member, fiber_norm_identity
from .fixtures import BUILTINS, builtin
from .grid import Grid, quadrature
from .io import InputError, csv_text, json_text, parse_potential
from .oracle import closed_form, delta_fiber, fd_matrix_oracle
from .potential import Potential
from .schrodinger import (
    CERTIFIED,
    SUBSTEPS,
    NumericalError,
    greens_function,
    is_nonnegative,
    lambda0_line,
)

COMMANDS = ("classify", "preimage", "eig", "evolve", "greens", "selftest")
NEEDS_POTENTIAL = ("classify", "preimage", "eig", "greens")
DEFAULT_FORMAT = {"classify": "json", "preimage": "json", "eig": "csv", "evolve": "csv", "greens": "json",
                  "selftest": "json"}


class RunConfig(BaseModel):
    command: Literal["classify", "preimage", "eig", "evolve", "greens", "selftest"]
    input: Optional[str] = None
    builtin: Optional[Literal["square_well", "delta", "w_eps", "well_perturbation", "zero", "constant"]] = None
    grid: Optional[tuple[float, float, PositiveInt]] = None
    lam: Optional[float] = Field(default=None, alias="lambda")
    eps: Optional[PositiveFloat] = None
    L_schedule: Optional[list[PositiveFloat]] = None
    c_schedule: Optional[list[PositiveFloat]] = None
    theta: float = Field(default=0.5, ge=0.0, le=1.0)
    class_tol: PositiveFloat = 1e-3
    rate_tol: PositiveFloat = 1e-8
    dt: Optional[PositiveFloat] = None
    T: PositiveFloat = 1.0
    modes: PositiveInt = 2048
    period: PositiveFloat = 64 * np.pi
    gaussian: float = 0.5
    width: PositiveFloat = ev.DEFAULT_WIDTH
    frames: PositiveInt = 5
    stride: Optional[PositiveInt] = None
    out: Optional[str] = None
    format: Optional[Literal["csv", "json"]] = None

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def _source(self):
        if self.command in NEEDS_POTENTIAL:
            if (self.input is None) == (self.builtin is None):
                raise ValueError(f"{self.command} needs exactly one of --input or --builtin")
        if self.input is not None and self.grid is not None:
            raise ValueError("--grid only applies to builtins; a potential file carries its own grid")
        if self.L_schedule is not None and sorted(self.L_schedule) != list(self.L_schedule):
            raise ValueError("L_schedule must increase")
        return self

    @property
    def fmt(self) -> str:
        return self.format or DEFAULT_FORMAT[self.command]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _grid(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--grid takes a,b,n")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse grid {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    S = argparse.SUPPRESS
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it", default=S)
    src = common.add_argument_group("potential")
    src.add_argument("--input", help="potential JSON file", default=S)
    src.add_argument("--builtin", choices=BUILTINS, default=S)
    src.add_argument("--grid", type=_grid, metavar="a,b,n", default=S)
    src.add_argument("--lambda", dest="lam", type=float, default=S,
                     help="delta weight, square-well mass or constant value")
    src.add_argument("--eps", type=float, default=S)
    num = common.add_argument_group("numerics")
    num.add_argument("--L-schedule", dest="L_schedule", type=_floats, metavar="L1,L2,...", default=S)
    num.add_argument("--c-schedule", dest="c_schedule", type=_floats, metavar="c1,c2,...", default=S)
    num.add_argument("--theta", type=float, default=S)
    num.add_argument("--class-tol", dest="class_tol", type=float, default=S)
    num.add_argument("--rate-tol", dest="rate_tol", type=float, default=S)
    num.add_argument("--dt", type=float, default=S)
    num.add_argument("--T", type=float, default=S)
    num.add_argument("--modes", type=int, default=S)
    num.add_argument("--period", type=float, default=S)
    num.add_argument("--gaussian", type=float, metavar="AMPLITUDE", default=S)
    num.add_argument("--width", type=float, default=S)
    num.add_argument("--frames", type=int, help="frames sampled for dumps and positivity checks", default=S)
    num.add_argument("--stride", type=int, help="node stride of the kernel CSV", default=S)
    o = common.add_argument_group("output")
    o.add_argument("--out", metavar="PREFIX", default=S)
    o.add_argument("--format", choices=("csv", "json"), default=S)

    parser = _Parser(prog="miura", description="Schroedinger operators, Miura preimages and mKdV/KdV evolution.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "classify": "nonnegativity verdict, line bottom and preimage class",
        "preimage": "extremal preimages and the fiber member at --theta",
        "eig": "Dirichlet ground energies on (-L, L)",
        "evolve": "mKdV run from a Gaussian, pushed forward to KdV",
        "greens": "Green's kernel with symmetry and accuracy checks",
        "selftest": "run the acceptance suite",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def config_from_args(argv: Optional[list[str]] = None) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    data = {}
    if "config" in ns:
        try:
            data = json.loads(Path(ns.pop("config")).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise InputError(f"cannot read config: {err}") from None
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
        data.pop("command", None)
    data.update(ns)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        msg = "; ".join(f"{'.'.join(map(str, e['loc'])) or '<config>'}: {e['msg']}" for e in err.errors())
        raise InputError(msg) from None


# ---------------------------------------------------------------------------
# commands


def load_potential(cfg: RunConfig) -> Potential:
    if cfg.input is not None:
        return parse_potential(cfg.input)
    grid = Grid(*cfg.grid) if cfg.grid is not None else None
    return builtin(cfg.builtin, grid, cfg.lam, cfg.eps)


def _grid_dict(grid: Grid) -> dict:
    return {"a": grid.a, "b": grid.b, "n": grid.n, "h": grid.h}


def _source(cfg: RunConfig, q: Potential) -> dict:
    return {"input": cfg.input, "builtin": cfg.builtin, "lambda": cfg.lam, "eps": cfg.eps, "label": q.label}


def _L_values(cfg: RunConfig, q: Potential) -> list[float]:
    return list(cfg.L_schedule) if cfg.L_schedule is not None else default_L_values(q)


class Outcome:
    """Main stdout text plus named files (suffix -> text)."""

    def __init__(self, stdout: str, files: Optional[dict] = None, status: int = 0):
        self.stdout, self.files, self.status = stdout, files or {}, status


def _pick(cfg: RunConfig, report: dict, table: Optional[str]) -> str:
    return json_text(report) if cfg.fmt == "json" or table is None else table


def cmd_classify(cfg: RunConfig) -> Outcome:
    q = load_potential(cfg)
    verdict = is_nonnegative(q)
    L = _L_values(cfg, q)
    report = {"command": "classify", "source": _source(cfg, q), "nonneg": verdict.as_dict(),
              "truncation": {"grid": _grid_dict(q.grid), "L_values": L, "c_schedule": cfg.c_schedule,
                             "substeps": SUBSTEPS, "class_tol": cfg.class_tol, "rate_tol": cfg.rate_tol}}
    if verdict.verdict == CERTIFIED:
        rep = fiber(q, L, cfg.class_tol, cfg.rate_tol, c_schedule=cfg.c_schedule)
        d = rep.as_dict()
        report.update({"fiber_class": rep.fiber_class, "lambda0_class": rep.lambda0_class,
                       "lambda0_extrapolated": rep.lambda0_extrapolated, "consistent": rep.consistent,
                       "m_plus": d["m_plus"], "m_minus": d["m_minus"], "spectral": d["spectral"],
                       "details": d["details"]})
    else:
        spec = lambda0_line(q, L)
        report.update({"fiber_class": None, "lambda0_class": None, "spectral": spec.as_dict(),
                       "note": "the preimage is empty: q is not nonnegative"})
    rows = [(k, v) for k, v in _flatten(report)]
    return Outcome(_pick(cfg, report, csv_text(("key", "value"), rows)), {"report.json": json_text(report)})


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], "" if obj is None else obj


def _reference_error(cfg: RunConfig, q: Potential, r_plus, r_minus) -> Optional[dict]:
    """Sup error of the extremal preimages against a closed form, when the builtin has one."""
    x = q.grid.x
    if cfg.input is not None or cfg.builtin not in ("delta", "constant", "zero"):
        return None
    if cfg.builtin == "delta":
        lam = 1.0 if cfg.lam is None else cfg.lam
        away = np.abs(x) > q.grid.h / 2
        ep = np.max(np.abs(r_plus.values - delta_fiber(lam, 1.0, x))[away])
        em = np.max(np.abs(r_minus.values - delta_fiber(lam, 0.0, x))[away])
        return {"closed_form": "delta", "sup_error_theta1": float(ep), "sup_error_theta0": float(em)}
    if cfg.builtin == "constant":
        c = 1.0 if cfg.lam is None else cfg.lam
        k = float(np.sqrt(c))
        return {"closed_form": "constant", "sup_error_theta1": float(np.max(np.abs(r_plus.values + k))),
                "sup_error_theta0": float(np.max(np.abs(r_minus.values - k)))}
    return {"closed_form": "zero", "sup_error_theta1": float(np.max(np.abs(r_plus.values))),
            "sup_error_theta0": float(np.max(np.abs(r_minus.values)))}


def cmd_preimage(cfg: RunConfig) -> Outcome:
    q = load_potential(cfg)
    L = _L_values(cfg, q)
    rep = fiber(q, L, cfg.class_tol, cfg.rate_tol, c_schedule=cfg.c_schedule)
    single = rep.fiber_class == E1
    r_theta = rep.r_plus if single else fiber_member(rep, cfg.theta)
    norms = fiber_norm_identity(rep)
    report = rep.as_dict()
    report.update({"command": "preimage", "source": _source(cfg, q), "theta": cfg.theta,
                   "single_point": single, "norm_identity": norms.as_rows(),
                   "norm_sq_theta": float(quadrature(r_theta * r_theta)),
                   "reference": _reference_error(cfg, q, rep.r_plus, rep.r_minus),
                   "truncation": {"grid": _grid_dict(q.grid), "L_values": L,
                                  "c_schedule": {"plus": rep.y_plus.info.get("c_schedule"),
                                                 "minus": rep.y_minus.info.get("c_schedule")},
                                  "substeps": SUBSTEPS, "class_tol": cfg.class_tol, "rate_tol": cfg.rate_tol}})
    table = csv_text(("x", "r_theta1", "r_theta0", "r_theta"),
                     zip(q.grid.x, rep.r_plus.values, rep.r_minus.values, r_theta.values))
    return Outcome(_pick(cfg, report, table), {"report.json": json_text(report), "endpoints.csv": table})


def cmd_eig(cfg: RunConfig) -> Outcome:
    q = load_potential(cfg)
    L = _L_values(cfg, q)
    spec = lambda0_line(q, L)
    report = {"command": "eig", "source": _source(cfg, q), **spec.as_dict(),
              "truncation": {"grid": _grid_dict(q.grid), "L_values": L, "substeps": SUBSTEPS}}
    table = csv_text(("L", "lambda0"), zip(spec.L_values, spec.lambda0_of_L))
    return Outcome(_pick(cfg, report, table), {"report.json": json_text(report), "lambda0.csv": table})


def cmd_evolve(cfg: RunConfig) -> Outcome:
    v0 = ev.gaussian(cfg.gaussian, cfg.width)
    tr = ev.evolve(v0, cfg.T, dt=cfg.dt, period=cfg.period, modes=cfg.modes)
    n0 = tr.norm_sq_v[0]
    drift = float(np.max(np.abs(tr.norm_sq_v / n0 - 1))) if n0 > 0 else 0.0
    gap = float(np.max(np.abs(tr.special_integral_u - tr.norm_sq_v)) / max(n0, np.finfo(float).tiny))
    basket = ev.default_basket(cfg.T)
    residuals = ev.weak_kdv_residual(tr, basket) if n0 > 0 else []
    picks = np.unique(np.linspace(0, len(tr.times) - 1, min(cfg.frames, len(tr.times))).round().astype(int))
    positivity = [{"time": float(tr.times[i]), **is_nonnegative(tr.frame_potential(int(i))).as_dict()}
                  for i in picks]
    rows = tr.invariant_rows()
    table = csv_text(("time", "l2_v", "special_integral_u", "mass_v"),
                     ((r["time"], r["l2_v"], r["special_integral_u"], r["mass_v"]) for r in rows))
    report = {
        "command": "evolve",
        "initial": {"kind": "gaussian", "amplitude": cfg.gaussian, "width": cfg.width},
        "truncation": {"period": tr.period, "modes": tr.modes, "dt": tr.dt, "T": cfg.T,
                       "steps": tr.info["steps"], "dealias": "2/3"},
        "norm_sq_drift": drift,
        "special_integral_gap": gap,
        "weak_residuals": [{"raw": r.raw, "scale": r.scale, "relative": r.relative} for r in residuals],
        "weak_residual_max": max((abs(r.relative) for r in residuals), default=0.0),
        "edge_max": tr.edge_max,
        "edge_ok": tr.info["edge_ok"],
        "positivity": positivity,
        "invariants": rows,
    }
    frames = {"x": tr.x, "times": tr.times[picks], "v": tr.v_frames[picks], "u": tr.u_frames[picks]}
    return Outcome(_pick(cfg, report, table),
                   {"trace.csv": table, "report.json": json_text(report), "frames.json": json_text(frames)})


def cmd_greens(cfg: RunConfig) -> Outcome:
    q = load_potential(cfg)
    K = greens_function(q)
    grid = q.grid
    x = grid.x
    stride = cfg.stride or max(1, int(np.ceil((grid.n + 1) / 201)))
    idx = np.arange(0, grid.n + 1, stride)
    f = np.exp(-x**2) * (1 + 0.5 * np.sin(2 * x))
    u = K.apply(f)
    Lu = fd_matrix_oracle(q, (grid.a, grid.b), grid.n).apply(u)
    accuracy = {"round_trip_fd": float(np.max(np.abs(Lu - f[1:-1])) / np.max(np.abs(f))),
                "test_function": "exp(-x^2) (1 + sin(2x)/2)"}
    if cfg.input is None and cfg.builtin == "constant":
        c = 1.0 if cfg.lam is None else cfg.lam
        accuracy["sup_error_closed_form"] = float(np.max(np.abs(K.G - closed_form("constant", c=c).G(x, x))))
    report = {"command": "greens", "source": _source(cfg, q), "wronskian": K.wronskian,
              "wronskian_spread": K.wronskian_spread, "symmetry_defect": K.symmetry_defect(),
              "accuracy": accuracy,
              "truncation": {"grid": _grid_dict(grid), "kernel_stride": int(stride), "substeps": SUBSTEPS}}
    table = csv_text(("x", "y", "G"), ((x[i], x[j], K.G[i, j]) for i in idx for j in idx))
    return Outcome(_pick(cfg, report, table), {"report.json": json_text(report), "kernel.csv": table})


def cmd_selftest(cfg: RunConfig) -> Outcome:
    results = acceptance.run_all(echo=lambda line: print(line, flush=True))
    passed = sum(r.passed for r in results)
    table = f"{passed}/{len(results)} criteria passed\n"
    report = {"command": "selftest", "passed": passed, "total": len(results),
              "criteria": [{"number": r.number, "title": r.title, "passed": r.passed, "summary": r.summary,
                            "seconds": r.seconds, "metrics": r.metrics} for r in results]}
    status = 0 if passed == len(results) else 2
    return Outcome(table, {"report.json": json_text(report)}, status)


HANDLERS = {"classify": cmd_classify, "preimage": cmd_preimage, "eig": cmd_eig, "evolve": cmd_evolve,
            "greens": cmd_greens, "selftest": cmd_selftest}


def _write(prefix: str, files: dict):
    base = Path(prefix)
    if base.parent and not base.parent.exists():
        raise InputError(f"output directory {base.parent} does not exist")
    for suffix, text in files.items():
        Path(f"{prefix}_{suffix}").write_text(text)


def run(cfg: RunConfig) -> int:
    outcome = HANDLERS[cfg.command](cfg)
    if cfg.out:
        _write(cfg.out, outcome.files)
    sys.stdout.write(outcome.stdout)
    return outcome.status


def main(argv: Optional[list[str]] = None) -> int:
    cfg = None
    try:
        cfg = config_from_args(argv)
        with np.errstate(over="ignore", under="ignore"):
            return run(cfg)
    except (InputError, ValueError, OSError) as err:
        print(f"miura: invalid input: {err}", file=sys.stderr)
        return 1
    except (NumericalError, FloatingPointError, ArithmeticError) as err:
        prefix = cfg.out if cfg is not None and cfg.out else "miura"
        diag = {"error": type(err).__name__, "message": str(err),
                "config": cfg.model_dump(by_alias=True) if cfg is not None else None,
                "traceback": traceback.format_exc().splitlines()}
        path = f"{prefix}_diagnostics.json"
        try:
            Path(path).write_text(json_text(diag))
            where = f"; diagnostics in {path}"
        except OSError:
            where = ""
        print(f"miura: numerical failure: {err}{where}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
