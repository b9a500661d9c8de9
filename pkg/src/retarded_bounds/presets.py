"""Named instances used by the CLI, the acceptance tests and the scripts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .corollaries import PowerCaseParams, log_case_bound, log_case_instance, sun_thm21_bound, sun_thm22_bound
from .problem import ProblemInstance, Theorem


@dataclass(frozen=True)
class Preset:
    name: str
    instance: ProblemInstance
    reference: Callable[[float], float] | None = None  # closed form at t, when there is one
    note: str = ""


def _gronwall() -> Preset:
    inst = ProblemInstance.from_strings(phi="x", c="1", eta="x", w="1", alpha="t", f="1", name="gronwall")
    return Preset("gronwall", inst, math.exp, "u <= 1 + int_0^t u, bound e^t")


def _blowup() -> Preset:
    inst = ProblemInstance.from_strings(phi="x", c="1", eta="x", w="x", alpha="t", f="1", name="blowup")
    return Preset("blowup", inst, lambda t: 1.0 / (1.0 - t), "u <= 1 + int_0^t u^2, bound 1/(1-t)")


LIPOVAN = PowerCaseParams(2.0, 1.0, 1.0)
SUN21 = PowerCaseParams(3.0, 1.0, 1.0)
SUN22 = PowerCaseParams(2.0, 1.0, 1.0)


def _lipovan() -> Preset:
    inst = LIPOVAN.instance(f="1", alpha="t/2", name="lipovan")
    ref = lambda t: sun_thm21_bound(LIPOVAN, "1", "0", "1", "t/2", t)  # noqa: E731
    return Preset("lipovan", inst, ref, "m=2, n=1: bound 1 + t/2")


def _sun21() -> Preset:
    f, g, w, alpha = "1+s", "0.5", "1+x", "t/2"
    inst = SUN21.instance(f=f, g=g, w=w, alpha=alpha, name="sun21")
    ref = lambda t: sun_thm21_bound(SUN21, f, g, w, alpha, t)  # noqa: E731
    return Preset("sun21", inst, ref, "power case m=3, n=1, first form")


def _sun22() -> Preset:
    inst = SUN22.instance(f="0", g="1", w="1", alpha="t", theorem_form=Theorem.TWO, name="sun22")
    ref = lambda t: sun_thm22_bound(SUN22, "0", "1", "1", "t", t)  # noqa: E731
    return Preset("sun22", inst, ref, "power case m=2, n=1, second form: bound 1 + t")


def _log() -> Preset:
    c, f, w, alpha, n, x0 = 2.0, "1", "1", "t", 1.0, 1.0
    inst = log_case_instance(c, f, w, alpha, n, x0, name="log")
    ref = lambda t: log_case_bound(c, f, w, alpha, n, x0, t)  # noqa: E731
    return Preset("log", inst, ref, "eta = (x+1) ln(x+1), x0 = 1")


_BUILDERS = {
    "gronwall": _gronwall,
    "blowup": _blowup,
    "lipovan": _lipovan,
    "sun21": _sun21,
    "sun22": _sun22,
    "log": _log,
}

PRESET_NAMES = tuple(_BUILDERS)


def get_preset(name: str) -> Preset:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None
