"""Command line front end: ``retarded-bounds {bound,verify,tau,batch}``.

Exit codes: 0 ok, 1 invalid instance or config, 2 dominance failure,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bounds import HorizonError, TauSearch, bound_curve, build_tables, remark_tau
from .expr import EvalDomainError, ParseError
from .numerics import InversionError, QuadratureError, uniform_grid
from .oracle import FAMILIES, check_dominance, generate_random_instance, solve_equality, solve_extrapolated
from .presets import PRESET_NAMES, get_preset
from .problem import InstanceError, ProblemInstance, validate

EXIT_OK, EXIT_INVALID, EXIT_DOMINANCE, EXIT_NUMERIC = 0, 1, 2, 3

CSV_HEADER = "t,bound,oracle,margin,in_domain"
PROBLEM_KEYS = ("phi", "c", "eta", "w", "alpha", "f", "g", "x0", "x1", "theorem", "theorem_form", "t_max")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: dict = field(default_factory=dict)
    preset: str | None = None
    seed: int | None = None
    family: str = "mixed"
    grid: int | None = None
    tol: float = 1e-12
    seeds: int = 50
    t_max: float | None = None
    scale_bound: float = 1.0
    rel_slack: float = 1e-6
    abs_slack: float = 1e-8
    horizon_fraction: float = 1.0
    max_iter: int = 50
    extrapolate: bool = True
    out: str | None = None

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        problem = dict(raw.pop("problem", {}))
        # problem keys may also sit at the top level
        for key in PROBLEM_KEYS:
            if key in raw and key != "t_max":
                problem[key] = raw.pop(key)
        known = {f for f in cls.__dataclass_fields__ if f != "problem"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(problem=problem, **raw)

    def instance(self) -> ProblemInstance:
        if self.preset is not None:
            inst = get_preset(self.preset).instance
            if self.problem:
                inst = inst.with_(**self.problem)
        elif self.seed is not None and not self.problem:
            inst = generate_random_instance(self.seed, self.family)
        else:
            inst = ProblemInstance.from_strings(**{k: str(v) if k in "phi c eta w alpha f g".split() else v
                                                   for k, v in self.problem.items()})
        if self.t_max is not None:
            inst = inst.with_(t_max=float(self.t_max))
        return inst

    def grid_for(self, inst: ProblemInstance, default: int):
        return uniform_grid(inst.t_max, self.grid or default)


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.9g}"


def _table(curve, oracle_u=None, margin=None) -> list[str]:
    rows = [CSV_HEADER]
    for i, t in enumerate(curve.grid.nodes):
        rows.append(",".join([
            _fmt(t), _fmt(curve.values[i]),
            "" if oracle_u is None else _fmt(oracle_u[i]),
            "" if margin is None else _fmt(margin[i]),
            "true" if curve.in_domain[i] else "false",
        ]))
    return rows


def _emit(cfg: RunConfig, rows: list[str], summary: list[str]) -> None:
    if cfg.out:
        Path(cfg.out).write_text("\n".join(rows) + "\n")
        print("\n".join(summary))
    else:
        print("\n".join(rows))
        print("\n".join("# " + line for line in summary))


def _validated(cfg: RunConfig) -> ProblemInstance:
    inst = cfg.instance()
    report = validate(inst)
    if not report.passed:
        raise InstanceError("instance fails validation", report)
    return inst


def cmd_bound(cfg: RunConfig) -> int:
    inst = _validated(cfg)
    tables = build_tables(inst, check=False)
    curve = bound_curve(inst, tables, cfg.grid_for(inst, 101))
    summary = [
        f"tau: {_fmt(curve.tau)}",
        f"tau_capped: {str(curve.tau_capped).lower()}",
        f"x0: {_fmt(tables.x0)}",
        f"x1: {_fmt(tables.x1)}",
        f"psi_bounded: {str(tables.psi_image.bounded).lower()}",
        "tolerances: quadrature 1e-10, tables 1e-9, tau 1e-9, safety margin 1e-6",
    ]
    if cfg.preset and get_preset(cfg.preset).reference is not None and curve.in_domain[-1]:
        ref = get_preset(cfg.preset).reference(float(curve.grid.nodes[-1]))
        summary.append(f"closed_form_at_t_max: {_fmt(ref)}")
    _emit(cfg, _table(curve), summary)
    return EXIT_OK


def _verify_one(inst: ProblemInstance, cfg: RunConfig, n_default: int):
    grid = cfg.grid_for(inst, n_default)
    tables = build_tables(inst, check=False)
    curve = bound_curve(inst, tables, grid)
    if cfg.scale_bound != 1.0:
        curve = curve.scaled(cfg.scale_bound)
    # the Richardson-corrected oracle needs an odd node count
    if cfg.extrapolate and grid.size % 2 == 1 and grid.size >= 5:
        sol = solve_extrapolated(inst, grid, max_iter=cfg.max_iter, tol=cfg.tol)
    else:
        sol = solve_equality(inst, grid, max_iter=cfg.max_iter, tol=cfg.tol)
    if not sol.converged and sol.stall_index is None:
        raise ArithmeticError(f"oracle did not converge in {cfg.max_iter} sweeps")
    report = check_dominance(sol, curve, cfg.rel_slack, cfg.abs_slack, cfg.horizon_fraction)
    return curve, sol, report


def cmd_verify(cfg: RunConfig) -> int:
    inst = _validated(cfg)
    curve, sol, report = _verify_one(inst, cfg, 2001)
    blow = "none" if sol.blowup_index is None else _fmt(sol.grid.nodes[sol.blowup_index])
    summary = [
        f"pass: {str(report.passed).lower()}",
        f"max_violation: {_fmt(report.max_violation)}",
        f"worst_t: {_fmt(report.worst_t)}",
        f"compared_nodes: {int(report.compared.sum())}",
        f"tau: {_fmt(curve.tau)}",
        f"oracle_sweeps: {sol.iterations}",
        f"oracle: {'trapezoid + richardson' if cfg.extrapolate and len(curve.grid) % 2 else 'trapezoid'}",
        f"oracle_blowup_t: {blow}",
        f"slack: rel {cfg.rel_slack:g}, abs {cfg.abs_slack:g}",
    ]
    if cfg.scale_bound != 1.0:
        summary.append(f"bound_scaled_by: {cfg.scale_bound:g}")
    _emit(cfg, _table(curve, sol.u, report.margin), summary)
    return EXIT_OK if report.passed else EXIT_DOMINANCE


def cmd_tau(cfg: RunConfig) -> int:
    inst = _validated(cfg)
    tables = build_tables(inst, check=False)
    curve = bound_curve(inst, tables, uniform_grid(inst.t_max, 2))
    lines = []
    if not tables.psi_image.bounded:
        lines.append("Psi unbounded; tau = t_max")
    else:
        lines.append(f"Psi bounded; M ~ {_fmt(tables.M)}")
        try:
            lines.append(f"look-ahead tau (delta = t_max): {_fmt(remark_tau(inst, tables, TauSearch()))}")
        except HorizonError as exc:
            lines.append(f"look-ahead tau unavailable: {exc}")
    lines.append(f"tau = {curve.tau:.9f}" + (" (capped at t_max)" if curve.tau_capped else ""))
    print("\n".join(lines))
    return EXIT_OK


def cmd_batch(cfg: RunConfig) -> int:
    if cfg.seeds < 1:
        raise ConfigError("seeds must be >= 1")
    start = cfg.seed or 0
    rows = ["seed,family,theorem,tau,compared,max_violation,min_rel_margin,pass"]
    failing = []
    for seed in range(start, start + cfg.seeds):
        inst = generate_random_instance(seed, cfg.family)
        if cfg.t_max is not None:
            inst = inst.with_(t_max=float(cfg.t_max))
        curve, sol, report = _verify_one(inst, cfg, 2001)
        with np.errstate(all="ignore"):
            rel = report.margin / curve.values
        rel_min = float(np.nanmin(rel[report.compared][1:])) if report.compared.sum() > 1 else math.nan
        rows.append(",".join([
            str(seed), cfg.family, str(int(inst.theorem_form)), _fmt(curve.tau),
            str(int(report.compared.sum())), _fmt(report.max_violation), _fmt(rel_min),
            str(report.passed).lower(),
        ]))
        if not report.passed:
            failing.append(seed)
    summary = [f"seeds: {cfg.seeds}", f"failing: {' '.join(map(str, failing)) or 'none'}",
               f"horizon_fraction: {cfg.horizon_fraction:g}"]
    _emit(cfg, rows, summary)
    return EXIT_DOMINANCE if failing else EXIT_OK


COMMANDS = {"bound": cmd_bound, "verify": cmd_verify, "tau": cmd_tau, "batch": cmd_batch}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="retarded-bounds", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="JSON config file")
    ap.add_argument("--preset", choices=PRESET_NAMES)
    ap.add_argument("--out", help="write the CSV table here instead of stdout")
    ap.add_argument("--seed", type=int, help="random instance seed (batch: first seed)")
    ap.add_argument("--seeds", type=int, help="number of seeds for batch")
    ap.add_argument("--family", choices=FAMILIES)
    ap.add_argument("--grid", type=int, help="number of grid nodes")
    ap.add_argument("--tol", type=float, help="oracle convergence tolerance")
    ap.add_argument("--t-max", dest="t_max", type=float)
    ap.add_argument("--horizon-fraction", dest="horizon_fraction", type=float,
                    help="compare only t <= fraction * tau")
    ap.add_argument("--plain-oracle", dest="extrapolate", action="store_false", default=None,
                    help="skip the Richardson correction of the oracle")
    ap.add_argument("--scale-bound", dest="scale_bound", type=float,
                    help="self-test: multiply the bound before the dominance check")
    return ap


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_json(args.config.read_text()) if args.config else RunConfig()
    overrides = {k: getattr(args, k) for k in
                 ("preset", "out", "seed", "seeds", "family", "grid", "tol", "t_max",
                  "horizon_fraction", "scale_bound", "extrapolate")
                 if getattr(args, k) is not None}
    cfg = replace(cfg, **overrides)
    if cfg.preset is not None and cfg.preset not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {cfg.preset!r}")
    if cfg.family not in FAMILIES:
        raise ConfigError(f"unknown family {cfg.family!r}")
    if cfg.grid is not None and cfg.grid < 2:
        raise ConfigError("grid needs at least 2 nodes")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except InstanceError as exc:
        print(f"invalid instance: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(exc.report.summary(), file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, ParseError, EvalDomainError, KeyError, TypeError, OSError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (HorizonError, QuadratureError, InversionError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
