"""Problem instances and hypothesis checking by dense sampling."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .expr import Binary, Literal, Variable, compile_expr, parse, to_source
from .numerics import bracket_ladder, cumulative, diverges_at_zero, invert_monotone, probe_image_sup

__all__ = [
    "Theorem",
    "ScalarFn",
    "Kernel",
    "ProblemInstance",
    "Violation",
    "ValidationReport",
    "InstanceError",
    "validate",
    "require_valid",
    "DEFAULT_SAMPLES",
    "EPS_STRICT",
]

DEFAULT_SAMPLES = 256
EPS_STRICT = 1e-12

# which variable each role is written in
ROLE_VARS = {"phi": "x", "eta": "x", "w": "x", "c": "t", "alpha": "t"}


class Theorem(enum.IntEnum):
    ONE = 1
    TWO = 2


class InstanceError(ValueError):
    """The instance violates a hypothesis, or x0 is inadmissible."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ScalarFn:
    text: str
    role: str

    def __post_init__(self):
        if self.role not in ROLE_VARS:
            raise ValueError(f"unknown role {self.role!r}")
        object.__setattr__(self, "expr", parse(self.text, {ROLE_VARS[self.role]}))

    @property
    def var(self) -> str:
        return ROLE_VARS[self.role]

    @cached_property
    def _strict(self):
        return compile_expr(self.expr, strict=True)

    @cached_property
    def _masked(self):
        return compile_expr(self.expr, strict=False)

    def __call__(self, v):
        """Strict evaluation (raises on domain errors)."""
        return self._strict(**{self.var: v})

    def masked(self, v):
        """Evaluation with NaN where the expression is undefined."""
        out = self._masked(**{self.var: v})
        return np.broadcast_to(out, np.shape(v)).astype(float) if np.ndim(v) else out


@dataclass(frozen=True)
class Kernel:
    """A kernel ``k(t, s)``; for corollaries ``s`` alone is allowed."""

    text: str
    role: str

    def __post_init__(self):
        object.__setattr__(self, "expr", parse(self.text, {"t", "s"}))

    @cached_property
    def _masked(self):
        return compile_expr(self.expr, strict=False)

    @cached_property
    def _strict(self):
        return compile_expr(self.expr, strict=True)

    def __call__(self, t, s):
        return self._strict(t=t, s=s)

    def masked(self, t, s):
        out = self._masked(t=t, s=s)
        shape = np.broadcast_shapes(np.shape(t), np.shape(s))
        return np.broadcast_to(out, shape).astype(float) if shape else out

    @property
    def is_zero(self) -> bool:
        e = self.expr
        return getattr(e, "value", None) == 0.0


def _normalise_theorem(kw):
    # "theorem" is accepted as a short alias in configs
    if "theorem" in kw:
        kw["theorem_form"] = kw.pop("theorem")
    if "theorem_form" in kw:
        kw["theorem_form"] = Theorem(int(kw["theorem_form"]))


def _fn(text, role):
    return text if isinstance(text, ScalarFn) else ScalarFn(str(text), role)


def _kern(text, role):
    return text if isinstance(text, Kernel) else Kernel(str(text), role)


@dataclass(frozen=True)
class ProblemInstance:
    """Hypothesis bundle of a first-form or second-form problem.

    ``x0=None`` means "pick the default" (0 when admissible, else c(0)/2).
    """

    phi: ScalarFn
    c: ScalarFn
    eta: ScalarFn
    w: ScalarFn
    alpha: ScalarFn
    f: Kernel
    g: Kernel
    x0: float | None = None
    x1: float = 1.0
    theorem_form: Theorem = Theorem.ONE
    t_max: float = 1.0
    name: str = field(default="", compare=False)

    @classmethod
    def from_strings(cls, phi="x", c="1", eta="x", w="1", alpha="t", f="0", g="0", **kw):
        _normalise_theorem(kw)
        return cls(
            phi=_fn(phi, "phi"), c=_fn(c, "c"), eta=_fn(eta, "eta"), w=_fn(w, "w"),
            alpha=_fn(alpha, "alpha"), f=_kern(f, "f"), g=_kern(g, "g"), **kw,
        )

    def with_(self, **changes) -> "ProblemInstance":
        """Copy with some fields replaced; strings are parsed for function fields."""
        for key in ("phi", "c", "eta", "w", "alpha"):
            if key in changes:
                changes[key] = _fn(changes[key], key)
        for key in ("f", "g"):
            if key in changes:
                changes[key] = _kern(changes[key], key)
        _normalise_theorem(changes)
        return replace(self, **changes)

    def as_strings(self) -> dict:
        return {
            "phi": self.phi.text, "c": self.c.text, "eta": self.eta.text, "w": self.w.text,
            "alpha": self.alpha.text, "f": self.f.text, "g": self.g.text,
            "x0": self.x0, "x1": self.x1, "theorem": int(self.theorem_form), "t_max": self.t_max,
        }

    # -- derived callables -------------------------------------------------

    @cached_property
    def phi0(self) -> float:
        return float(self.phi.masked(np.array([0.0]))[0])

    @cached_property
    def c0(self) -> float:
        return float(self.c(0.0))

    @cached_property
    def _phi_ladder(self):
        return bracket_ladder(self.phi.masked, 0.0)

    @cached_property
    def _phi_power(self):
        """p when phi is literally ``x^p`` (or ``x``), else None."""
        e = self.phi.expr
        if isinstance(e, Variable):
            return 1.0
        if (isinstance(e, Binary) and e.op == "^" and isinstance(e.left, Variable)
                and isinstance(e.right, Literal) and e.right.value > 0):
            return float(e.right.value)
        return None

    def phi_inv(self, y):
        """Inverse of phi on ``[phi(0), inf)``; NaN elsewhere."""
        p = self._phi_power
        if p is None:
            return invert_monotone(self.phi.masked, y, 0.0, on_error="nan", ladder=self._phi_ladder)
        y = np.asarray(y, dtype=float)
        with np.errstate(invalid="ignore"):
            out = np.where(y >= 0, y if p == 1.0 else np.abs(y) ** (1.0 / p), np.nan)
        return float(out) if out.ndim == 0 else out

    def g_integrand(self, s):
        """``1 / eta(phi^-1(s))``; inf where eta vanishes."""
        with np.errstate(all="ignore"):
            e = self.eta.masked(self.phi_inv(np.asarray(s, dtype=float)))
            return np.where(e > 0, 1.0 / np.where(e > 0, e, 1.0), np.where(np.isnan(e), np.nan, np.inf))

    @cached_property
    def g_diverges_at_base(self) -> bool:
        """Whether ``int_{phi(0)} ds / eta(phi^-1(s))`` diverges at its lower end."""
        base = self.phi0
        x_probe = max(self.c0 - base, 1e-300)
        return diverges_at_zero(lambda s: self.g_integrand(base + s), x_probe=x_probe)

    def default_x0(self) -> float:
        base = max(self.phi0, 0.0)
        return 0.5 * (base + self.c0) if self.g_diverges_at_base else base

    def resolved_x0(self) -> float:
        return self.default_x0() if self.x0 is None else float(self.x0)


@dataclass(frozen=True)
class Violation:
    hypothesis: str
    witness: object
    magnitude: float


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()
    warnings: tuple = ()

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.passed

    def summary(self) -> str:
        if self.passed:
            lines = ["validation passed"]
        else:
            lines = ["validation FAILED"]
            for v in self.violations:
                lines.append(f"  {v.hypothesis}: witness {v.witness!r}, magnitude {v.magnitude:.3g}")
        for v in self.warnings:
            lines.append(f"  warning {v.hypothesis}: witness {v.witness!r}, magnitude {v.magnitude:.3g}")
        return "\n".join(lines)


class _Collector:
    def __init__(self):
        self.items = []
        self.warnings = []

    def worst(self, name, points, excess, warning=False):
        """Record the worst positive excess (if any) over the sample points."""
        excess = np.asarray(excess, dtype=float)
        bad = np.isnan(excess) | (excess > 0)
        if not bad.any():
            return
        score = np.where(np.isnan(excess), np.inf, excess)
        k = int(np.argmax(np.where(bad, score, -np.inf)))
        witness = points[k] if not isinstance(points, tuple) else tuple(float(p[k]) for p in points)
        if not isinstance(witness, tuple):
            witness = float(witness)
        (self.warnings if warning else self.items).append(Violation(name, witness, float(score[k])))


def _increase_deficit(vals):
    """Positive where consecutive samples decrease (equal infinities are fine)."""
    with np.errstate(invalid="ignore"):
        d = np.diff(vals)
    return np.where(vals[1:] == vals[:-1], 0.0, -d)


def validate(inst: ProblemInstance, samples: int = DEFAULT_SAMPLES) -> ValidationReport:
    """Check the theorem hypotheses on sample grids.

    Never raises for hypothesis failures; they come back as violations.  This
    is evidence, not proof.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    out = _Collector()
    ts = np.linspace(0.0, float(inst.t_max), samples)

    c = inst.c.masked(ts)
    out.worst("c evaluable", ts, np.where(np.isnan(c), np.nan, -1.0))
    out.worst("c > 0", ts, -c + (c == 0))
    out.worst("c nondecreasing", ts[1:], _increase_deficit(c))

    alpha = inst.alpha.masked(ts)
    out.worst("alpha evaluable", ts, np.where(np.isnan(alpha), np.nan, -1.0))
    out.worst("alpha >= 0", ts, -alpha)
    out.worst("alpha(t) <= t", ts, alpha - ts)
    out.worst("alpha nondecreasing", ts[1:], _increase_deficit(alpha))

    c_top = float(np.nanmax(c)) if np.isfinite(c).any() else 1.0
    x_span = max(4.0, 4.0 * abs(c_top))
    xs = np.concatenate([np.linspace(0.0, x_span, samples), x_span * np.ldexp(1.0, np.arange(1, 21))])

    phi = inst.phi.masked(xs)
    out.worst("phi evaluable", xs, np.where(np.isnan(phi), np.nan, -1.0))
    out.worst("phi >= 0", xs, -phi)
    d = np.diff(phi)
    scale = np.maximum(np.abs(phi[:-1]), np.abs(phi[1:]))
    # strict increase: a step must beat the relative strictness tolerance
    out.worst("phi strictly increasing", xs[1:], np.where(d > EPS_STRICT * scale, -1.0, EPS_STRICT * scale - d + 1e-300))
    probe = inst.phi.masked(x_span * np.ldexp(1.0, np.arange(0, 61)))
    finite = probe[np.isfinite(probe)]
    if not (finite.size and (np.max(finite) > c_top or np.any(np.isinf(probe)))):
        top = float(np.max(finite)) if finite.size else math.nan
        out.worst("phi unbounded", np.array([x_span * 2.0 ** 60]), np.array([c_top - top if finite.size else np.nan]))

    for fn in (inst.eta, inst.w):
        v = fn.masked(xs)
        out.worst(f"{fn.role} evaluable", xs, np.where(np.isnan(v), np.nan, -1.0))
        out.worst(f"{fn.role} >= 0", xs, -v)
        out.worst(f"{fn.role} > 0 on (0, inf)", xs[1:], np.where(v[1:] > 0, -1.0, 1.0 - v[1:]))
        out.worst(f"{fn.role} nondecreasing", xs[1:], _increase_deficit(v))

    n2 = min(samples, 64)
    t2 = np.linspace(0.0, float(inst.t_max), n2)
    T, S = np.meshgrid(t2, t2, indexing="ij")  # rows: t, columns: fixed s
    for k in (inst.f, inst.g):
        v = k.masked(T, S)
        out.worst(f"{k.role} evaluable", (T.ravel(), S.ravel()), np.where(np.isnan(v), np.nan, -1.0).ravel())
        out.worst(f"{k.role} >= 0", (T.ravel(), S.ravel()), -v.ravel())
        dv = -np.diff(v, axis=0)
        out.worst(f"{k.role} nondecreasing in t", (T[1:].ravel(), S[1:].ravel()), dv.ravel())

    if not out.items:
        _check_x_params(inst, out)
    return ValidationReport(tuple(out.items), tuple(out.warnings))


def _check_x_params(inst: ProblemInstance, out: _Collector) -> None:
    c0 = inst.c0
    base = max(inst.phi0, 0.0)
    out.worst("c(0) > phi(0)", np.array([0.0]), np.array([base - c0 + (c0 == base)]))
    if not inst.x1 > 0:
        out.worst("x1 > 0", np.array([inst.x1]), np.array([-inst.x1 + 1e-300]))
    if inst.x0 is not None:
        x0 = float(inst.x0)
        out.worst("c(0) > x0", np.array([x0]), np.array([x0 - c0 + (x0 == c0)]))
        out.worst("x0 >= phi(0)", np.array([x0]), np.array([base - x0]))
        if x0 == base and inst.g_diverges_at_base:
            out.worst("x0 > 0 (G diverges at 0)", np.array([x0]), np.array([1.0]))
    if out.items:
        return
    # the G-divergence condition at infinity is only probed, so it is a warning
    x0 = inst.resolved_x0()
    # only the tail matters, so start away from a possible singularity at x0
    pts = max(inst.c0, x0) * np.ldexp(1.0, np.arange(0, 61))
    try:
        run = cumulative(inst.g_integrand, pts, tol=1e-6)
        probe = probe_image_sup(lambda x: np.interp(x, pts, run), float(pts[0]))
        finite_limit = probe.bounded
        limit = probe.sup_estimate
    except ArithmeticError:
        finite_limit, limit = True, math.nan
    if finite_limit:
        out.worst("int_{x0}^inf ds/eta(phi^-1(s)) = inf", np.array([x0]), np.array([limit]), warning=True)


def require_valid(inst: ProblemInstance, samples: int = DEFAULT_SAMPLES) -> ValidationReport:
    report = validate(inst, samples)
    if not report.passed:
        raise InstanceError(report.summary(), report)
    return report
