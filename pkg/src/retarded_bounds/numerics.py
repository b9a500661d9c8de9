"""Floating-point kernels shared by the bound engine.

Everything here is vectorised over numpy arrays and deterministic: the same
inputs always produce bit-identical outputs.  Integrands passed to the
quadrature routines should accept an ndarray; plain scalar callables are
detected and wrapped.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Grid",
    "ImageProbe",
    "QuadratureError",
    "InversionError",
    "uniform_grid",
    "integrate",
    "integrate_many",
    "cumulative",
    "invert_monotone",
    "bracket_ladder",
    "Ladder",
    "probe_image_sup",
    "diverges_at_zero",
    "HermiteTable",
    "AnchoredIntegral",
]

DEFAULT_TOL = 1e-10
BISECT_REL_WIDTH = 1e-12
MAX_DEPTH = 100
DIVERGENCE_BUDGET = 200_000
EVAL_BUDGET = 4_000_000


class QuadratureError(ArithmeticError):
    """Quadrature could not produce a trustworthy value.

    ``estimate`` carries the best available value when one exists.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class InversionError(ArithmeticError):
    """Target lies outside the probed image of the function being inverted."""


@dataclass(frozen=True)
class Grid:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 1:
            raise ValueError("grid must be a non-empty 1-d array")
        if nodes[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> float:
        return float(np.max(np.diff(self.nodes))) if self.size > 1 else 0.0

    def __len__(self):
        return self.size


def uniform_grid(t_max: float, n: int) -> Grid:
    if n < 2:
        raise ValueError("need at least two grid nodes")
    return Grid(np.linspace(0.0, float(t_max), int(n)))


@dataclass(frozen=True)
class ImageProbe:
    """Result of probing ``sup F`` along a geometric sequence.

    ``sup_estimate`` is ``inf`` when the image looks unbounded.  ``inf_estimate``
    is F at the first probe point, i.e. an upper estimate of the infimum.
    """

    sup_estimate: float
    bounded: bool
    probe_points: np.ndarray
    inf_estimate: float = math.nan
    flagged: bool = False
    note: str = ""


def _safe_scalar(h, v):
    try:
        return h(float(v))
    except OverflowError:
        return math.inf


def _as_vector_fn(h: Callable) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap ``h`` so it maps float arrays to float arrays of the same shape."""
    if getattr(h, "_vectorised", False):
        return h
    mode = []

    def vec(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            if not mode:
                try:
                    with warnings.catch_warnings():
                        # math-module functions accept size-1 arrays with a warning
                        warnings.simplefilter("error", DeprecationWarning)
                        out = h(x)
                    if np.shape(out) == x.shape:
                        mode.append("array")
                        return np.asarray(out, dtype=float)
                    mode.append("scalar")
                except (TypeError, ValueError, DeprecationWarning):
                    mode.append("scalar")
            if mode[0] == "array":
                return np.asarray(h(x), dtype=float)
            return np.array([_safe_scalar(h, v) for v in x.ravel()], dtype=float).reshape(x.shape)

    vec._vectorised = True
    return vec


# ---------------------------------------------------------------------------
# quadrature


def _simpson(fa, fm, fb, width):
    return width / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive_simpson(h2, a, b, tol, abs_tol=None, max_depth=MAX_DEPTH, budget=EVAL_BUDGET):
    """Breadth-first adaptive Simpson over a batch of intervals.

    ``h2(s, owner)`` evaluates the integrand of interval ``owner`` at ``s``.
    Returns ``(values, errors, converged)`` per owner.  Without ``abs_tol``
    each owner's budget is ``tol * (1 + |first estimate|)``.

    Error control is per owner and global: intervals whose Richardson error
    is below their width share of half the budget are frozen, the rest are
    split until the summed error of the owner drops below its budget.  That
    keeps integrable endpoint singularities convergent.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n_owner = a.size
    values = np.zeros(n_owner)
    errors = np.zeros(n_owner)
    converged = np.ones(n_owner, dtype=bool)
    live = b > a
    if not live.any():
        return values, errors, converged

    owner = np.flatnonzero(live)
    lo, hi = a[owner], b[owner]
    mid = 0.5 * (lo + hi)
    fa = h2(lo, owner)
    # a singular left endpoint is never used: evaluate at a + eps instead
    singular = ~np.isfinite(fa)
    singular_owner = np.zeros(n_owner, dtype=bool)
    singular_owner[owner[singular]] = True
    if singular.any():
        fa = fa.copy()
        nudged = lo[singular] + 1e-14 * (hi[singular] - lo[singular])
        fa[singular] = h2(nudged, owner[singular])
    fm = h2(mid, owner)
    fb = h2(hi, owner)
    bad = ~(np.isfinite(fa) & np.isfinite(fm) & np.isfinite(fb))
    if bad.any():
        o = int(owner[np.argmax(bad)])
        raise QuadratureError(f"non-finite integrand on [{a[o]!r}, {b[o]!r}]")
    whole = _simpson(fa, fm, fb, hi - lo)

    span = np.where(live, b - a, 1.0)
    if abs_tol is not None:
        abs_tol = np.broadcast_to(np.asarray(abs_tol, dtype=float), (n_owner,))
    frozen_sum = np.zeros(n_owner)
    frozen_err = np.zeros(n_owner)
    evaluations = 3 * owner.size
    depth = 0
    while owner.size:
        m = 0.5 * (lo + hi)
        lm = 0.5 * (lo + m)
        rm = 0.5 * (m + hi)
        f_lm = h2(lm, owner)
        f_rm = h2(rm, owner)
        evaluations += 2 * owner.size
        bad = ~(np.isfinite(f_lm) & np.isfinite(f_rm))
        if bad.any():
            o = int(owner[np.argmax(bad)])
            raise QuadratureError(f"non-finite integrand inside [{a[o]!r}, {b[o]!r}]")
        left = _simpson(fa, f_lm, fm, m - lo)
        right = _simpson(fm, f_rm, fb, hi - m)
        both = left + right
        # the Richardson-corrected value is kept, but the error is taken as the
        # raw difference: on steep pre-asymptotic panels |diff| / 15
        # understates the true error by an order of magnitude
        err = both - whole
        refined = both + err / 15.0
        # Richardson estimates are blind to the missing mass next to a
        # singular endpoint; that interval is refined down to max_depth
        pinned = singular_owner[owner] & (lo == a[owner])
        if abs_tol is None:
            # the nudged endpoint value would inflate the scale estimate
            est = np.bincount(owner[~pinned], weights=refined[~pinned], minlength=n_owner)
            abs_tol = tol * (1.0 + np.abs(est))
        share = 0.5 * abs_tol[owner] * ((hi - lo) / span[owner])
        # once its whole mass is negligible the pinned interval can go
        pinned &= np.abs(refined) > 0.25 * abs_tol[owner]
        freeze = np.abs(err) <= share
        active_err = np.bincount(owner, weights=np.abs(err), minlength=n_owner)
        owner_done = (frozen_err + active_err) <= abs_tol
        accept = freeze | owner_done[owner]
        if depth >= max_depth:
            accept |= pinned
            pinned[:] = False
        else:
            accept &= ~pinned
        if depth >= max_depth or evaluations > budget:
            converged[np.unique(owner[~accept])] = False
            accept[:] = True
        frozen_sum += np.bincount(owner[accept], weights=refined[accept], minlength=n_owner)
        frozen_err += np.bincount(owner[accept], weights=np.abs(err[accept]), minlength=n_owner)
        keep = ~accept
        if not keep.any():
            break
        o = owner[keep]
        owner = np.concatenate([o, o])
        lo, hi = np.concatenate([lo[keep], m[keep]]), np.concatenate([m[keep], hi[keep]])
        fa, fm, fb = (
            np.concatenate([fa[keep], fm[keep]]),
            np.concatenate([f_lm[keep], f_rm[keep]]),
            np.concatenate([fm[keep], fb[keep]]),
        )
        whole = np.concatenate([left[keep], right[keep]])
        depth += 1
    values[:] = frozen_sum
    errors[:] = frozen_err
    return values, errors, converged


def _batch_wrapper(h2):
    def wrapped(s, owner):
        with np.errstate(all="ignore"):
            out = np.asarray(h2(s, owner), dtype=float)
        return np.broadcast_to(out, s.shape).astype(float, copy=False)

    return wrapped


def integrate_many(h2, a, b, tol: float = DEFAULT_TOL, strict: bool = True):
    """Integrate a batch of integrands at once.

    ``h2(s, owner)`` must return the integrand of problem ``owner`` at points
    ``s`` (arrays of equal shape).  Returns the array of integrals, or
    ``(values, converged)`` when ``strict`` is false.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    if np.any(a > b):
        raise ValueError("integrate_many requires a <= b")
    values, _, converged = _adaptive_simpson(_batch_wrapper(h2), a, b, tol)
    if strict:
        if not converged.all():
            raise QuadratureError("refinement budget exhausted", estimate=values)
        return values
    return values, converged


def integrate(h: Callable, a: float, b: float, tol: float = DEFAULT_TOL) -> float:
    """Adaptive Simpson estimate of the integral of ``h`` over ``[a, b]``.

    The error target is mixed: ``|err| <= tol * (1 + |result|)``.

    Raises:
        QuadratureError: for a non-finite integrand at an interior node, or
            when the refinement budget runs out (``estimate`` is attached).
    """
    if a > b:
        raise ValueError("integrate requires a <= b")
    vec = _as_vector_fn(h)
    values, converged = integrate_many(lambda s, o: vec(s), [a], [b], tol, strict=False)
    if not converged[0]:
        raise QuadratureError("refinement budget exhausted", estimate=float(values[0]))
    return float(values[0])


def cumulative(h: Callable, grid, tol: float = DEFAULT_TOL, budget: float = EVAL_BUDGET) -> np.ndarray:
    """Running integrals ``result[i] = int_{grid[0]}^{grid[i]} h``.

    One adaptive integral per panel, so the result is panel-additive.  Panel
    ``j`` gets the absolute budget ``tol/2 * (m_j + (1 + C_j) * 6/pi^2/(j+1)^2)``,
    where ``m_j`` is a coarse estimate of its mass and ``C_j`` of the running
    total, so every entry satisfies ``|err| <= tol * (1 + |result[i]|)``.
    """
    nodes = grid.nodes if isinstance(grid, Grid) else np.asarray(grid, dtype=float)
    out = np.zeros(nodes.size)
    if nodes.size < 2:
        return out
    vec = _as_vector_fn(h)
    lo, hi = nodes[:-1], nodes[1:]
    h2 = _batch_wrapper(lambda s, o: vec(s))
    coarse, _, _ = _adaptive_simpson(h2, lo, hi, 1e-3, max_depth=40)
    mass = np.abs(coarse)
    running = np.cumsum(mass)
    j = np.arange(1, lo.size + 1, dtype=float)
    panel_tol = 0.5 * tol * (mass + (1.0 + running) * (6.0 / math.pi**2) / j**2)
    values, _, converged = _adaptive_simpson(h2, lo, hi, tol, abs_tol=panel_tol, budget=budget)
    out[1:] = np.cumsum(values)
    if not converged.all():
        raise QuadratureError("refinement budget exhausted", estimate=out)
    return out


# ---------------------------------------------------------------------------
# inversion


LADDER_EXPONENTS = np.arange(-1075, 1024)


@dataclass(frozen=True)
class Ladder:
    """Values of an increasing function on ``x_lo + 2**e`` for fractional ``e``."""

    x: np.ndarray
    f: np.ndarray


def bracket_ladder(F: Callable, x_lo: float = 0.0, per_binade: int = 16) -> Ladder:
    """Tabulate ``F`` at ``x_lo + 2**(e + j/per_binade)`` over the double range.

    Passing the result to :func:`invert_monotone` as ``ladder`` replaces the
    per-call exponent search by a table lookup that already brackets the root
    to a fraction of a binade.  Undefined values count as ``+inf``.
    """
    e = np.arange(-1075 * per_binade, 1023 * per_binade + 1) / per_binade
    x = float(x_lo) + np.exp2(e)
    x = np.unique(x[np.isfinite(x)])
    x = np.concatenate([[float(x_lo)], x[x > x_lo]])
    vals = _as_vector_fn(F)(x)
    vals = np.where(np.isnan(vals), np.inf, vals)
    return Ladder(x, np.maximum.accumulate(vals))


def invert_monotone(F: Callable, y, x_lo: float = 0.0, tol: float = DEFAULT_TOL,
                    sup: float | None = None, on_error: str = "raise", ladder=None):
    """Solve ``F(x) = y`` for ``x >= x_lo`` with ``F`` strictly increasing.

    The bracket is found by doubling the step away from ``x_lo`` (done as a
    binary search over the step exponent, or looked up in a precomputed
    ``ladder``), then safeguarded false position runs until the bracket's
    relative width is below 1e-12 and ``|F(x) - y| <= tol * (1 + |y|)``, or
    no float lies between the ends.

    ``y`` may be a scalar or an array.  Targets above ``sup`` or beyond any
    finite bracket raise :class:`InversionError` (``on_error="raise"``) or
    come back as NaN (``on_error="nan"``).
    """
    vec = _as_vector_fn(F)
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(np.asarray(y, dtype=float)).astype(float)
    x_lo = float(x_lo)
    result = np.full(y.shape, np.nan)
    failed = ~np.isfinite(y)
    if sup is not None:
        failed |= y >= sup
    f_lo = float(vec(np.array([x_lo]))[0])
    slack = tol * (1.0 + np.abs(y))
    failed |= y < f_lo - slack
    at_lo = ~failed & (y <= f_lo)
    result[at_lo] = x_lo
    todo = np.flatnonzero(~failed & ~at_lo)
    if todo.size:
        x, exhausted = _solve_bracketed(vec, y[todo], slack[todo], x_lo, f_lo, ladder)
        result[todo] = x
        failed[todo[exhausted]] = True
    if failed.any() and on_error == "raise":
        bad = float(y[np.argmax(failed)])
        if sup is not None and bad >= sup:
            raise InversionError(f"target {bad!r} is above the probed supremum {sup!r}")
        if bad < f_lo:
            raise InversionError(f"target {bad!r} is below F(x_lo) = {f_lo!r}")
        raise InversionError(f"bracket expansion exhausted for target {bad!r}")
    return float(result[0]) if scalar else result


def _solve_bracketed(vec, yt, st, x_lo, f_lo, ladder):
    n = yt.size
    if ladder is not None:
        # first ladder point with F >= y; its predecessor brackets from below
        j = np.searchsorted(ladder.f, yt, side="left")
        exhausted = j >= ladder.f.size
        j = np.clip(j, 1, ladder.f.size - 1)
        lo, hi = ladder.x[j - 1], ladder.x[j]
        f_l, f_h = ladder.f[j - 1], ladder.f[j]
    else:
        # exponent search; 12 rounds cover the whole double range
        e_lo = np.full(n, -1075)
        e_hi = np.full(n, 1023)
        f_l = np.full(n, f_lo)
        f_h = vec(x_lo + np.ldexp(1.0, e_hi))
        exhausted = f_h < yt
        for _ in range(12):
            e_mid = (e_lo + e_hi) // 2
            f_m = vec(x_lo + np.ldexp(1.0, e_mid))
            is_below = f_m < yt
            e_lo = np.where(is_below, e_mid, e_lo)
            f_l = np.where(is_below, f_m, f_l)
            e_hi = np.where(is_below, e_hi, e_mid)
            f_h = np.where(is_below, f_h, f_m)
        lo = x_lo + np.ldexp(1.0, e_lo)
        hi = x_lo + np.ldexp(1.0, e_hi)
    r_l = f_l - yt
    r_h = f_h - yt
    # Illinois false position; a bisection step whenever the bracket failed
    # to halve over the previous four steps
    last_side = np.zeros(n)
    history = np.full((n, 4), np.inf)
    act = np.flatnonzero(~exhausted)
    for it in range(2200):
        if not act.size:
            break
        l, h, rl, rh = lo[act], hi[act], r_l[act], r_h[act]
        width = h - l
        mid = l + 0.5 * width
        done = ((width <= BISECT_REL_WIDTH * np.abs(h)) & (np.minimum(np.abs(rl), np.abs(rh)) <= st[act]))
        done |= (mid <= l) | (mid >= h)
        if done.any():
            keep = ~done
            act, l, h, rl, rh, width, mid = (v[keep] for v in (act, l, h, rl, rh, width, mid))
            if not act.size:
                break
        side = last_side[act]
        with np.errstate(all="ignore"):
            secant = l - rl * width / (rh - rl)
        # overshoot by half the target width toward the stale end, so a
        # one-sided approach still closes the bracket
        secant = secant - side * (0.5 * BISECT_REL_WIDTH) * np.abs(h)
        use_mid = ~((secant > l) & (secant < h)) | (width > 0.5 * history[act, it % 4])
        trial = np.where(use_mid, mid, secant)
        r_t = vec(trial) - yt[act]
        is_below = r_t < 0
        # Illinois: halve the stale end's residual after a repeat
        rh = np.where(is_below & (side == -1), 0.5 * rh, rh)
        rl = np.where(~is_below & (side == 1), 0.5 * rl, rl)
        lo[act] = np.where(is_below, trial, l)
        r_l[act] = np.where(is_below, r_t, rl)
        hi[act] = np.where(is_below, h, trial)
        r_h[act] = np.where(is_below, rh, r_t)
        last_side[act] = np.where(is_below, -1.0, 1.0)
        history[act, it % 4] = width
    x = np.where(np.abs(r_l) < np.abs(r_h), lo, hi)
    x[exhausted] = np.nan
    return x, exhausted


# ---------------------------------------------------------------------------
# probes


def probe_image_sup(F: Callable, x_start: float, k_max: int = 60, flat_run: int = 5,
                    rel_tol: float = 1e-12) -> ImageProbe:
    """Probe ``sup F`` at ``x_start * 2**k`` for ``k = 0..k_max``.

    The image is called bounded when the last ``flat_run`` increments are each
    below ``rel_tol * (1 + |F|)``; the cap is then the last value plus the last
    increment.  A non-finite probe value stops the scan and the image is
    classified as bounded at the last finite value (flagged).
    """
    xs = float(x_start) * np.ldexp(1.0, np.arange(k_max + 1))
    vec = _as_vector_fn(F)
    fx = vec(xs)
    finite = np.isfinite(fx)
    flagged = False
    note = ""
    if not finite.all():
        stop = int(np.argmax(~finite))
        if stop == 0:
            raise ValueError(f"F is not finite at the first probe point {xs[0]!r}")
        xs, fx = xs[:stop], fx[:stop]
        flagged = True
        note = f"non-finite value at probe {stop}"
    points = np.column_stack([xs, fx])
    inc = np.diff(fx)
    if np.any(inc < 0):
        flagged = True
        note = (note + "; " if note else "") + "probe values decrease"
    if flagged and note.startswith("non-finite"):
        last_inc = max(float(inc[-1]), 0.0) if inc.size else 0.0
        return ImageProbe(float(fx[-1]) + last_inc, True, points, float(fx[0]), True, note)
    tail = inc[-flat_run:]
    flat = inc.size >= flat_run and bool(np.all(np.abs(tail) < rel_tol * (1.0 + np.abs(fx[-flat_run:]))))
    if flat:
        return ImageProbe(float(fx[-1]) + max(float(inc[-1]), 0.0), True, points, float(fx[0]), flagged, note)
    return ImageProbe(math.inf, False, points, float(fx[0]), flagged, note)


def diverges_at_zero(h: Callable, tol: float = 1e-6, x_probe: float = 1.0) -> bool:
    """Heuristic test whether ``int_0^x_probe h`` diverges at the left end.

    Computes ``I_k = int_{x_probe 2^-k}^{x_probe} h`` for ``k = 4..40`` and
    reports divergence unless the last increment has shrunk below
    ``tol * (1 + |I_40|)``.  Inconclusive probes (non-finite values,
    quadrature failures, including an integrand too noisy near 0 to
    integrate within a small evaluation budget) count as divergent.
    """
    ks = np.arange(40, 3, -1)
    pts = np.concatenate([float(x_probe) * np.ldexp(1.0, -ks), [float(x_probe)]])
    try:
        run = cumulative(h, pts, tol=1e-10, budget=DIVERGENCE_BUDGET)
    except (QuadratureError, ArithmeticError):
        return True
    tails = run[-1] - run[:-1]  # I_40, I_39, ..., I_4
    if not np.all(np.isfinite(tails)):
        return True
    increment = tails[0] - tails[1]
    return not bool(abs(increment) < tol * (1.0 + abs(tails[0])))


# ---------------------------------------------------------------------------
# tabulated monotone functions


class HermiteTable:
    """Piecewise cubic Hermite interpolant of an increasing function.

    Anchors carry exact values and derivatives; derivatives are limited
    (Fritsch-Carlson) so each panel stays monotone.  ``inverse`` finds the
    panel by binary search over the anchor values and bisects inside it.
    """

    def __init__(self, x, y, d):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d = np.asarray(d, dtype=float).copy()
        if x.size < 2 or np.any(np.diff(x) <= 0):
            raise ValueError("anchors must be strictly increasing")
        if np.any(np.diff(y) < 0):
            raise ValueError("tabulated values must be nondecreasing")
        self.x, self.y = x, y
        self.d = self._limit(x, y, d)

    @staticmethod
    def _limit(x, y, d):
        dx = np.diff(x)
        secant = np.diff(y) / dx
        d = np.where(np.isfinite(d), np.maximum(d, 0.0), np.inf)
        d_left = d[:-1].copy()
        d_right = d[1:].copy()
        flat = secant == 0
        with np.errstate(all="ignore"):
            a = np.where(flat, 0.0, d_left / secant)
            b = np.where(flat, 0.0, d_right / secant)
        r = np.hypot(np.minimum(a, 1e300), np.minimum(b, 1e300))
        with np.errstate(divide="ignore"):
            scale = np.where(r > 3.0, 3.0 / r, 1.0)
        d_left = np.where(flat, 0.0, np.minimum(a, 1e300) * scale * secant)
        d_right = np.where(flat, 0.0, np.minimum(b, 1e300) * scale * secant)
        # each panel keeps its own limited end slopes
        return np.column_stack([d_left, d_right])

    @property
    def x_min(self):
        return float(self.x[0])

    @property
    def x_max(self):
        return float(self.x[-1])

    def _panel(self, x):
        k = np.searchsorted(self.x, x, side="right") - 1
        return np.clip(k, 0, self.x.size - 2)

    def _eval_in(self, k, x):
        x0, x1 = self.x[k], self.x[k + 1]
        w = x1 - x0
        u = (x - x0) / w
        y0, y1 = self.y[k], self.y[k + 1]
        d0, d1 = self.d[k, 0] * w, self.d[k, 1] * w
        u2 = u * u
        u3 = u2 * u
        h00 = 2 * u3 - 3 * u2 + 1
        h10 = u3 - 2 * u2 + u
        h01 = -2 * u3 + 3 * u2
        h11 = u3 - u2
        out = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
        # exact at anchors, clamped to the panel's value range
        out = np.where(u <= 0, y0, np.where(u >= 1, y1, out))
        return np.clip(out, y0, y1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.full(x.shape, np.nan)
        inside = (x >= self.x[0]) & (x <= self.x[-1])
        if inside.any():
            xi = x[inside]
            out[inside] = self._eval_in(self._panel(xi), xi)
        return float(out[0]) if scalar else out

    def inverse(self, y):
        """Inverse of the interpolant; NaN outside ``[y_min, y_max]``."""
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        out = np.full(y.shape, np.nan)
        inside = (y >= self.y[0]) & (y <= self.y[-1])
        idx = np.flatnonzero(inside)
        if idx.size:
            yt = y[idx]
            k = np.searchsorted(self.y, yt, side="left") - 1
            k = np.clip(k, 0, self.x.size - 2)
            lo = self.x[k].copy()
            hi = self.x[k + 1].copy()
            exact = self.y[k + 1] == yt
            lo[exact] = hi[exact]
            for _ in range(200):
                mid = lo + 0.5 * (hi - lo)
                go = (mid > lo) & (mid < hi)
                if not go.any():
                    break
                below = self._eval_in(k, mid) < yt
                lo = np.where(go & below, mid, lo)
                hi = np.where(go & ~below, mid, hi)
            out[idx] = np.where(self._eval_in(k, lo) >= yt, lo, hi)
        return float(out[0]) if scalar else out


class AnchoredIntegral:
    """The primitive ``x -> int_base^x h`` of a positive integrand.

    Values are tabulated at geometric anchors ``base + scale * 2**k``
    (``k_min <= k <= k_max``) and completed by a short quadrature from the nearest anchor below, so there
    is no interpolation error.  The table stops before the first anchor
    where ``h`` is non-finite or zero, or past ``top``.  Outside
    ``[base, x_max]`` the primitive is NaN; ``inverse`` is NaN outside
    ``[0, y_max]``.  Points in ``extra`` become anchors too, so evaluating
    there is a table lookup.
    """

    def __init__(self, h: Callable, base: float, scale: float, k_min: int = -80,
                 k_max: int = 100, tol: float = DEFAULT_TOL, top: float = 1e300, extra=()):
        self.h = _as_vector_fn(h)
        self.tol = tol
        base = float(base)
        scale = float(scale)
        if not (scale > 0 and math.isfinite(base) and base + scale <= top):
            raise ValueError("need a positive scale with base + scale below top")
        k_max = min(k_max, int(math.floor(math.log2((top - base) / scale))))
        offsets = scale * np.ldexp(1.0, np.arange(k_min, k_max + 1))
        extra = np.asarray(extra, dtype=float)
        extra = extra[np.isfinite(extra) & (extra > base) & (extra <= base + offsets[-1])]
        anchors = np.unique(np.concatenate([base + offsets, extra]))
        anchors = np.concatenate([[base], anchors[anchors > base]])
        hv = self.h(anchors)
        bad = ~(np.isfinite(hv[1:]) & (hv[1:] > 0))
        if bad.any():
            anchors = anchors[: int(np.argmax(bad)) + 1]
            hv = hv[: anchors.size]
        if anchors.size < 2:
            raise QuadratureError(f"integrand unusable just above {base!r}")
        self.x = anchors
        self.values = cumulative(self.h, anchors, tol=tol)
        self.slopes = hv
        self._guess = HermiteTable(anchors, self.values, hv)

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    @property
    def y_max(self) -> float:
        return float(self.values[-1])

    def _panel(self, x):
        k = np.searchsorted(self.x, x, side="right") - 1
        return np.clip(k, 0, self.x.size - 2)

    def _signed(self, a, b):
        """``int_a^b h`` for arrays ``a``, ``b`` in either order."""
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        vals = integrate_many(lambda s, o: self.h(s), lo, hi, self.tol)
        return np.where(b >= a, vals, -vals)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.full(x.shape, np.nan)
        inside = (x >= self.x[0]) & (x <= self.x[-1])
        if inside.any():
            xi = x[inside]
            k = self._panel(xi)
            out[inside] = self.values[k] + self._signed(self.x[k], xi)
        return float(out[0]) if scalar else out

    def inverse(self, y, max_iter: int = 80):
        """Solve ``primitive(x) = y`` by bracketed Newton steps inside one panel."""
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        out = np.full(y.shape, np.nan)
        inside = (y >= self.values[0]) & (y <= self.values[-1])
        idx = np.flatnonzero(inside)
        if idx.size:
            out[idx] = self._solve(y[idx], max_iter)
        return float(out[0]) if scalar else out

    def _solve(self, y, max_iter):
        k = np.clip(np.searchsorted(self.values, y, side="right") - 1, 0, self.x.size - 2)
        lo, hi = self.x[k].copy(), self.x[k + 1].copy()
        x = np.clip(self._guess.inverse(y), lo, hi)
        x = np.where(np.isfinite(x), x, lo)
        resid = self.values[k] + self._signed(lo, x) - y
        slack = 1e-12 * (1.0 + np.abs(y))
        todo = np.arange(y.size)
        for _ in range(max_iter):
            r = resid[todo]
            xt = x[todo]
            below = r < 0
            lo[todo] = np.where(below, xt, lo[todo])
            hi[todo] = np.where(below, hi[todo], xt)
            width_ok = (hi[todo] - lo[todo]) <= 4 * np.finfo(float).eps * np.abs(hi[todo])
            keep = ~((np.abs(r) <= slack[todo]) | width_ok)
            todo = todo[keep]
            if not todo.size:
                break
            xt, r = x[todo], resid[todo]
            l, u = lo[todo], hi[todo]
            with np.errstate(all="ignore"):
                step = xt - r / self.h(xt)
            bisect = ~((step > l) & (step < u))
            step = np.where(bisect, l + 0.5 * (u - l), step)
            resid[todo] = r + self._signed(xt, step)
            x[todo] = step
        return x
