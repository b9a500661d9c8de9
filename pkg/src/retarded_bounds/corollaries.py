"""Closed-form specialisations of the general bound.

Each corollary builds its own Psi by direct quadrature of
``ds / w(phi^-1(G^-1(s)))`` with the closed-form ``phi^-1 o G^-1``, and
inverts it with :func:`invert_monotone`.  None of this touches
:mod:`bounds`, so agreement between the two is a genuine cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .expr import variables
from .numerics import (
    InversionError,
    integrate,
    integrate_many,
    invert_monotone,
    probe_image_sup,
)
from .problem import Kernel, ProblemInstance, ScalarFn, Theorem

__all__ = [
    "PowerCaseParams",
    "CorollaryDomainError",
    "CappedValueWarning",
    "sun_thm21_bound",
    "sun_thm22_bound",
    "log_case_G",
    "log_case_G_inverse",
    "log_case_bound",
    "log_case_instance",
    "LOG_CAP",
]

LOG_CAP = 1e300
QUAD_TOL = 1e-11


class CorollaryDomainError(ArithmeticError):
    """The argument of Psi^-1 lies outside the image of Psi."""


class CappedValueWarning(RuntimeWarning):
    pass


def _fmt(v: float) -> str:
    return repr(float(v))


@dataclass(frozen=True)
class PowerCaseParams:
    """phi = x^m, c(t) = c^(m/(m-n)), eta = m/(m-n) x^n, so G(x) = x^((m-n)/m)."""

    m: float
    n: float
    c: float

    def __post_init__(self):
        if not (self.m > self.n > 0):
            raise ValueError("power case needs m > n > 0")
        if not self.c > 0:
            raise ValueError("power case needs c > 0")

    @property
    def gap(self) -> float:
        return self.m - self.n

    def G(self, x):
        return np.asarray(x, dtype=float) ** (self.gap / self.m)

    def level_root(self, y):
        """phi^-1(G^-1(y)) = y^(1/(m-n))."""
        return np.asarray(y, dtype=float) ** (1.0 / self.gap)

    def instance(self, f="0", g="0", w="1", alpha="t", theorem_form=Theorem.ONE,
                 t_max: float = 1.0, **kw) -> ProblemInstance:
        m, gap = self.m, self.gap
        return ProblemInstance.from_strings(
            phi=f"x^{_fmt(m)}",
            c=_fmt(self.c ** (m / gap)),
            eta=f"{_fmt(m / gap)}*x^{_fmt(self.n)}",
            w=_text(w), alpha=_text(alpha), f=_text(f), g=_text(g),
            theorem_form=theorem_form, t_max=t_max, **kw,
        )


def _text(obj) -> str:
    return obj.text if isinstance(obj, (ScalarFn, Kernel)) else str(obj)


def _one_var_kernel(k, role) -> Kernel:
    kern = k if isinstance(k, Kernel) else Kernel(str(k), role)
    if not variables(kern.expr) <= {"s"}:
        raise ValueError(f"{role} must depend on s only, got {kern.text!r}")
    return kern


def _fn(v, role) -> ScalarFn:
    return v if isinstance(v, ScalarFn) else ScalarFn(str(v), role)


def _kernel_mass(kern: Kernel, upper: float) -> float:
    if upper <= 0 or kern.is_zero:
        return 0.0
    return integrate(lambda s: kern.masked(0.0, s), 0.0, upper, QUAD_TOL)


class _DirectPsi:
    """Psi(x) = int_x1^x ds / w(level(s)) for a closed-form ``level``."""

    def __init__(self, w: ScalarFn, level, x1: float = 1.0):
        self.w = w
        self.level = level
        self.x1 = x1

    def q(self, s):
        with np.errstate(all="ignore"):
            return 1.0 / self.w.masked(self.level(s))

    def __call__(self, x: float) -> float:
        if x >= self.x1:
            return integrate(self.q, self.x1, x, QUAD_TOL)
        return -integrate(self.q, x, self.x1, QUAD_TOL)

    def _from(self, x_from: float):
        """Vectorised x -> int_{x_from}^x q, split on doubling segments.

        One adaptive pass over [x_from, 1e18] loses the tail mass, so the
        primitive is accumulated segment by segment instead.
        """
        scale = max(abs(x_from), 1.0)
        knots = x_from + scale * (2.0 ** np.arange(64) - 1.0)
        cum = [0.0]

        def F(x):
            x = np.atleast_1d(np.asarray(x, dtype=float))
            k = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, len(knots) - 2)
            while len(cum) <= int(k.max()):
                j = len(cum) - 1
                cum.append(cum[j] + integrate(self.q, knots[j], knots[j + 1], QUAD_TOL))
            head = np.array([cum[i] for i in k])
            return head + integrate_many(lambda s, o: self.q(s), knots[k], x, QUAD_TOL)

        return F

    def inverse(self, v: float, x_from: float) -> float:
        """Psi^-1(v), searching upward from ``x_from`` (needs Psi(x_from) <= v)."""
        base = self(x_from)
        rest = self._from(x_from)

        def F(x):
            return base + rest(x)

        probe = probe_image_sup(lambda d: F(x_from + d), max(x_from, 1.0))
        sup = probe.sup_estimate if probe.bounded else None
        if sup is not None and v >= sup:
            raise CorollaryDomainError(f"{v!r} is outside the image of Psi (sup ~ {sup!r})")
        try:
            return invert_monotone(F, v, x_lo=x_from, sup=sup)
        except InversionError as exc:
            raise CorollaryDomainError(str(exc)) from exc


def _power_psi(params: PowerCaseParams, w) -> _DirectPsi:
    return _DirectPsi(_fn(w, "w"), params.level_root)


def sun_thm21_bound(params: PowerCaseParams, f, g, w, alpha, t: float) -> float:
    """{Psi^-1[Psi(c + int_0^a g) + int_0^a f]}^(1/(m-n)) with a = alpha(t)."""
    f, g = _one_var_kernel(f, "f"), _one_var_kernel(g, "g")
    a = float(_fn(alpha, "alpha")(t))
    psi = _power_psi(params, w)
    p = params.c + _kernel_mass(g, a)
    target = psi(p) + _kernel_mass(f, a)
    return float(params.level_root(psi.inverse(target, p)))


def sun_thm22_bound(params: PowerCaseParams, f, g, w, alpha, t: float) -> float:
    """{Psi^-1[Psi(c) + int_0^alpha(t) f + int_0^t g]}^(1/(m-n))."""
    f, g = _one_var_kernel(f, "f"), _one_var_kernel(g, "g")
    a = float(_fn(alpha, "alpha")(t))
    psi = _power_psi(params, w)
    target = psi(params.c) + _kernel_mass(f, a) + _kernel_mass(g, float(t))
    return float(params.level_root(psi.inverse(target, params.c)))


# ---------------------------------------------------------------------------
# logarithmic eta: phi = x^n, eta = (x^n + 1) ln(x^n + 1)


def log_case_G(x, x0: float):
    """G(x) = ln ln(x + 1) - ln ln(x0 + 1); G(0) = -inf."""
    with np.errstate(divide="ignore"):
            return np.log(np.log1p(np.asarray(x, dtype=float))) - math.log(math.log1p(x0))


def log_case_G_inverse(x, x0: float, n: float = 1.0):
    """G^-1(x) = exp(e^x ln(x0 + 1)) - 1, capped at ``LOG_CAP`` with a warning.

    The inverse does not depend on ``n``; it is accepted so call sites can
    pass the corollary's parameters unchanged.
    """
    if not x0 > 0:
        raise ValueError("the log case needs x0 > 0")
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = np.expm1(np.exp(x) * math.log1p(x0))
    capped = ~(out <= LOG_CAP)
    if np.any(capped):
        warnings.warn(f"G^-1 overflow, value capped at {LOG_CAP:g}", CappedValueWarning, stacklevel=2)
        out = np.where(capped, LOG_CAP, out)
    return float(out) if out.ndim == 0 else out


def log_case_instance(c: float, f, w, alpha, n: float, x0: float, t_max: float = 1.0,
                      **kw) -> ProblemInstance:
    n_txt = _fmt(n)
    return ProblemInstance.from_strings(
        phi=f"x^{n_txt}", c=_fmt(c), eta=f"(x^{n_txt}+1)*ln(x^{n_txt}+1)",
        w=_text(w), alpha=_text(alpha), f=_text(f), g="0", x0=x0, x1=1.0, t_max=t_max, **kw,
    )


def log_case_bound(c: float, f, w, alpha, n: float, x0: float, t: float) -> float:
    """{G^-1(Psi^-1[Psi(G(c)) + int_0^alpha(t) f(t, s) ds])}^(1/n), with x1 = 1."""
    if not c > x0 > 0:
        raise ValueError("the log case needs c > x0 > 0")
    f = f if isinstance(f, Kernel) else Kernel(str(f), "f")
    w = _fn(w, "w")
    a = float(_fn(alpha, "alpha")(t))
    mass = 0.0
    if a > 0 and not f.is_zero:
        mass = integrate(lambda s: f.masked(float(t), s), 0.0, a, QUAD_TOL)

    def level(s):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CappedValueWarning)
            return log_case_G_inverse(s, x0) ** (1.0 / n)

    psi = _DirectPsi(w, level)
    start = float(log_case_G(c, x0))
    v = psi.inverse(psi(start) + mass, start)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CappedValueWarning)
        level = float(log_case_G_inverse(v, x0))
    if level >= LOG_CAP:
        # Psi^-1 landed so close to sup Psi that G^-1 overflows
        raise CorollaryDomainError(f"bound at t={t!r} exceeds {LOG_CAP:g}")
    return level ** (1.0 / n)
