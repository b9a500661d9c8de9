"""The transforms G and Psi, both bound formulas, and the validity horizon tau.

Psi is never integrated through G^-1 directly.  Writing s = G(y) turns

    Psi(G(y)) = int ds / w(phi^-1(G^-1(s)))

into ``K(y) - K(G^-1(x1))`` with ``K(y) = int dy / (eta(phi^-1(y)) w(phi^-1(y)))``,
so both transforms are primitives of closed-form integrands in the same
variable ``y`` (the value level of phi).  ``G^-1(Psi^-1(v))`` is then just
``K^-1(v + K(G^-1(x1)))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import (
    AnchoredIntegral,
    Grid,
    ImageProbe,
    integrate_many,
    probe_image_sup,
)
from .problem import InstanceError, ProblemInstance, Theorem, require_valid

__all__ = [
    "TransformTables",
    "TauSearch",
    "BoundCurve",
    "HorizonError",
    "build_tables",
    "p_eval",
    "f_integral",
    "g_integral",
    "psi_argument",
    "compute_tau",
    "horizon",
    "remark_tau",
    "bound_thm1",
    "bound_thm2",
    "bound_curve",
    "SAFETY_MARGIN",
]

SAFETY_MARGIN = 1e-6
KERNEL_TOL = 1e-10
TABLE_TOL = 1e-9


class HorizonError(ArithmeticError):
    """The domain predicate already fails at t = 0."""


@dataclass(frozen=True)
class TransformTables:
    """G, Psi and their inverses for one instance (fixed x0, x1)."""

    x0: float
    x1: float
    level: AnchoredIntegral  # G
    psi_level: AnchoredIntegral  # K, see module docstring
    psi_offset: float  # K(G^-1(x1))
    psi_image: ImageProbe
    G_image: ImageProbe

    def G(self, x):
        return self.level(x)

    def G_inv(self, s):
        return self.level.inverse(s)

    def Psi(self, x):
        return self.psi_level(self.level.inverse(x)) - self.psi_offset

    def Psi_inv(self, v):
        return self.level(self.psi_level.inverse(np.asarray(v, dtype=float) + self.psi_offset))

    def psi_of_level(self, y):
        """Psi(G(y)) without the round trip through G."""
        return self.psi_level(y) - self.psi_offset

    def level_of_psi(self, v):
        """G^-1(Psi^-1(v)); NaN when v is past the tabulated range."""
        return self.psi_level.inverse(np.asarray(v, dtype=float) + self.psi_offset)

    @property
    def M(self) -> float:
        return self.psi_image.sup_estimate


@dataclass(frozen=True)
class TauSearch:
    delta: float | None = None
    tol: float = 1e-9
    safety_margin: float = SAFETY_MARGIN
    nodes: int = 129

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.safety_margin < 1:
            raise ValueError("safety_margin must lie in (0, 1)")
        if self.nodes < 2:
            raise ValueError("need at least two search nodes")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True)
class BoundCurve:
    grid: Grid
    values: np.ndarray  # NaN marks nodes outside the domain
    tau: float
    tau_capped: bool
    in_domain: np.ndarray
    psi_argument: np.ndarray = field(repr=False)
    theorem_form: Theorem = Theorem.ONE

    def scaled(self, factor: float) -> "BoundCurve":
        return replace(self, values=self.values * factor)


def _level_integrand(inst: ProblemInstance):
    def k(y):
        v = inst.phi_inv(np.asarray(y, dtype=float))
        with np.errstate(all="ignore"):
            prod = inst.eta.masked(v) * inst.w.masked(v)
            return np.where(prod > 0, 1.0 / np.where(prod > 0, prod, 1.0),
                            np.where(np.isnan(prod), np.nan, np.inf))

    return k


def build_tables(inst: ProblemInstance, check: bool = True) -> TransformTables:
    """Tabulate G and Psi for ``inst``.

    Raises :class:`InstanceError` for an invalid instance or an inadmissible
    x0 (the G integral diverges at x0, or x0 >= c(0)).
    """
    if check:
        require_valid(inst)
    c0 = inst.c0
    base = max(inst.phi0, 0.0)
    x0 = inst.resolved_x0()
    if not (base <= x0 < c0):
        raise InstanceError(f"x0 = {x0!r} must satisfy phi(0) <= x0 < c(0) = {c0!r}")
    if x0 == base and inst.g_diverges_at_base:
        raise InstanceError("the G integral diverges at phi(0); choose x0 > phi(0)")
    x1 = float(inst.x1)
    if not x1 > 0:
        raise InstanceError("x1 must be positive")

    # both sup probes walk start * 2**k for k <= 60; making those points
    # anchors turns the probes into lookups
    ladder = np.ldexp(1.0, np.arange(61))
    level = AnchoredIntegral(inst.g_integrand, x0, c0 - x0, k_min=-60, k_max=64,
                             tol=TABLE_TOL, extra=c0 * ladder)
    y1 = level.inverse(x1)
    if not math.isfinite(y1):
        raise InstanceError(f"x1 = {x1!r} is beyond the range of G")
    y_lo = min(c0, y1)
    y_start = max(c0, y1)
    if y_start > c0:
        level = AnchoredIntegral(inst.g_integrand, x0, c0 - x0, k_min=-60, k_max=64, tol=TABLE_TOL,
                                 extra=np.concatenate([c0 * ladder, y_start * ladder]))
    k_top = 62 + math.ceil(math.log2(y_start / y_lo))
    psi_level = AnchoredIntegral(_level_integrand(inst), y_lo, y_lo, k_min=-60, k_max=k_top,
                                 tol=TABLE_TOL, extra=np.append(y_start * ladder, y1))
    offset = float(psi_level(y1))

    probe = probe_image_sup(lambda y: psi_level(y) - offset, y_start)
    ys = probe.probe_points[:, 0]
    # record Psi's probe in its own variable, x = G(y)
    psi_image = replace(probe, probe_points=np.column_stack([level(ys), probe.probe_points[:, 1]]))
    G_image = probe_image_sup(level, c0)
    return TransformTables(x0, x1, level, psi_level, offset, psi_image, G_image)


# ---------------------------------------------------------------------------
# the pieces of the bound


def _kernel_integral(kernel, t, upper):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    upper = np.maximum(np.broadcast_to(np.asarray(upper, dtype=float), t.shape), 0.0)
    if kernel.is_zero:
        return np.zeros(t.shape)
    return integrate_many(lambda s, o: kernel.masked(t[o], s), np.zeros(t.shape), upper, KERNEL_TOL)


def _maybe_scalar(t, out):
    return float(out[0]) if np.ndim(t) == 0 else out


def f_integral(inst: ProblemInstance, t):
    """int_0^alpha(t) f(t, s) ds."""
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    return _maybe_scalar(t, _kernel_integral(inst.f, tt, inst.alpha.masked(tt)))


def g_integral(inst: ProblemInstance, t, to_t: bool = False):
    """int_0^alpha(t) g(t, s) ds, or the integral up to t itself when ``to_t``."""
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    upper = tt if to_t else inst.alpha.masked(tt)
    return _maybe_scalar(t, _kernel_integral(inst.g, tt, upper))


def p_eval(inst: ProblemInstance, tables: TransformTables, t):
    """p(t) = G(c(t)) + int_0^alpha(t) g(t, s) ds."""
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    out = tables.G(inst.c.masked(tt)) + g_integral(inst, tt)
    return _maybe_scalar(t, out)


def psi_argument(inst: ProblemInstance, tables: TransformTables, t, theorem_form=None):
    """The argument of Psi^-1 in the bound, per theorem form."""
    form = Theorem(theorem_form or inst.theorem_form)
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if form is Theorem.ONE:
        p = tables.G(inst.c.masked(tt)) + g_integral(inst, tt)
        out = tables.Psi(p) + f_integral(inst, tt)
    else:
        out = tables.psi_of_level(inst.c.masked(tt)) + f_integral(inst, tt) + g_integral(inst, tt, to_t=True)
    return _maybe_scalar(t, out)


def _cap(tables: TransformTables, margin: float) -> float:
    if not tables.psi_image.bounded:
        return math.inf
    M = tables.M
    return M * (1.0 - margin) if M > 0 else M - margin * abs(M)


# ---------------------------------------------------------------------------
# tau


def horizon(inst: ProblemInstance, tables: TransformTables, search: TauSearch | None = None,
            theorem_form=None) -> tuple[float, bool]:
    """``(tau, capped)``: the validity horizon and whether it is just t_max."""
    search = search or TauSearch()
    t_max = float(inst.t_max)
    if not tables.psi_image.bounded:
        return t_max, True
    cap = _cap(tables, search.safety_margin)

    def holds(t):
        a = psi_argument(inst, tables, t, theorem_form)
        return np.isfinite(a) & (a < cap)

    nodes = np.linspace(0.0, t_max, search.nodes)
    ok = holds(nodes)
    if not ok[0]:
        raise HorizonError("domain predicate fails at t = 0")
    if ok.all():
        return t_max, True
    j = int(np.argmin(ok))
    lo, hi = float(nodes[j - 1]), float(nodes[j])
    while hi - lo > search.tol:
        mid = 0.5 * (lo + hi)
        if holds(mid):
            lo = mid
        else:
            hi = mid
    return lo, False


def compute_tau(inst: ProblemInstance, tables: TransformTables, search: TauSearch | None = None) -> float:
    return horizon(inst, tables, search)[0]


def remark_tau(inst: ProblemInstance, tables: TransformTables, search: TauSearch | None = None) -> float:
    """A conservative horizon from a fixed look-ahead ``delta``.

    Returns the largest tau in (0, delta] with int_0^alpha(t) f < M - Psi(p(delta))
    on [0, tau].  Always at most the horizon from :func:`compute_tau`.
    """
    search = search or TauSearch()
    delta = float(search.delta if search.delta is not None else inst.t_max)
    if not tables.psi_image.bounded:
        return delta
    budget = _cap(tables, search.safety_margin) - tables.Psi(p_eval(inst, tables, delta))
    if not budget > 0:
        raise HorizonError(f"Psi(p(delta)) already reaches M for delta = {delta!r}")
    nodes = np.linspace(0.0, delta, search.nodes)
    ok = f_integral(inst, nodes) < budget
    if ok.all():
        return delta
    j = int(np.argmin(ok))
    lo, hi = float(nodes[j - 1]), float(nodes[j])
    while hi - lo > search.tol:
        mid = 0.5 * (lo + hi)
        if f_integral(inst, mid) < budget:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# bound curves


def bound_curve(inst: ProblemInstance, tables: TransformTables, grid: Grid,
                search: TauSearch | None = None, theorem_form=None) -> BoundCurve:
    """Evaluate the bound of the given (default: the instance's) theorem form."""
    form = Theorem(theorem_form or inst.theorem_form)
    search = search or TauSearch()
    t = grid.nodes
    arg = np.asarray(psi_argument(inst, tables, t, form), dtype=float)
    tau, capped = horizon(inst, tables, search, form)
    cap = _cap(tables, search.safety_margin)
    usable = np.isfinite(arg) & (arg < cap)
    values = np.full(t.shape, np.nan)
    if usable.any():
        y = tables.level_of_psi(arg[usable])
        values[usable] = inst.phi_inv(y)
    in_domain = usable & (t <= tau) & np.isfinite(values) & (values > 0)
    values[~in_domain] = np.nan
    return BoundCurve(grid, values, tau, capped, in_domain, arg, form)


def bound_thm1(inst: ProblemInstance, tables: TransformTables, grid: Grid,
               search: TauSearch | None = None) -> BoundCurve:
    return bound_curve(inst, tables, grid, search, Theorem.ONE)


def bound_thm2(inst: ProblemInstance, tables: TransformTables, grid: Grid,
               search: TauSearch | None = None) -> BoundCurve:
    return bound_curve(inst, tables, grid, search, Theorem.TWO)
