"""Stable/unstable equilibria of the synchronising loops."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .energy import LurePiPlant, PiGains
from .errors import NumericError

ROOT_TOL = 1e-12
MAX_ITER = 100


class Stability(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class EquilibriumPair:
    delta_sep: float
    delta_uep: float
    exists: bool

    @classmethod
    def none(cls) -> EquilibriumPair:
        return cls(math.nan, math.nan, False)


def _newton(plant: LurePiPlant, seed: float) -> float:
    d = seed
    for _ in range(MAX_ITER):
        g = plant.y_ref - plant.f(d)
        if abs(g) <= ROOT_TOL:
            return float(d)
        dg = -plant.df_ddelta(d)
        if dg == 0:
            break
        d = d - g / dg
    g = plant.y_ref - plant.f(d)
    if abs(g) <= 1e-10:
        return float(d)
    raise NumericError(f"Newton did not converge from seed {seed:.6g}: residual {g:.3e}")


def _scan_roots(plant: LurePiPlant, lo: float, hi: float, n: int = 2001) -> list[float]:
    d = np.linspace(lo, hi, n)
    g = plant.y_ref - plant.f(d)
    roots = []
    for k in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)[0]:
        a, b = d[k], d[k + 1]
        if g[k] == 0 and roots and abs(roots[-1] - a) < 1e-9:
            continue
        roots.append(_newton(plant, a if abs(g[k]) < abs(g[k + 1]) else b))
    return roots


def solve_equilibria(plant: LurePiPlant, seeds: tuple[float, float] | None = None,
                     center: float = 0.0) -> EquilibriumPair:
    """Locate the SEP nearest ``center`` and the first UEP to its right.

    Analytic ``seeds`` (sep, uep) are refined by Newton. Without seeds the
    window ``[center - pi, center + pi)`` is scanned for sign changes of the
    loop error. A root is a SEP when ``f'`` is positive there. When seeds
    are given, results are shifted by whole turns into that window.
    """
    if seeds is not None:
        sep, uep = (_newton(plant, s) for s in seeds)
        shift = 2 * math.pi * math.floor((sep - center + math.pi) / (2 * math.pi))
        sep, uep = sep - shift, uep - shift
        while uep <= sep:
            uep += 2 * math.pi
        return EquilibriumPair(sep, uep, True)

    roots = _scan_roots(plant, center - math.pi, center + math.pi)
    seps = [r for r in roots if plant.df_ddelta(r) > 0]
    if not seps:
        return EquilibriumPair.none()
    sep = min(seps, key=lambda r: abs(r - center))
    right = [r for r in _scan_roots(plant, sep + 1e-9, sep + 2 * math.pi)
             if r > sep + 1e-9 and plant.df_ddelta(r) < 0]
    if not right:
        return EquilibriumPair.none()
    return EquilibriumPair(sep, min(right), True)


def pi_jacobian(plant: LurePiPlant, gains: PiGains, delta: float) -> np.ndarray:
    """Linearisation of the canonical PI loop in ``(delta, x_int)``."""
    df = float(plant.df_ddelta(delta))
    return np.array([[-gains.k_p * df, 1.0], [-gains.k_i * df, 0.0]])


def classify_jacobian(jac: np.ndarray, marginal: float = 1e-8) -> Stability:
    re = np.linalg.eigvals(jac).real
    if np.any(np.abs(re) < marginal):
        return Stability.INDETERMINATE
    return Stability.STABLE if np.all(re < 0) else Stability.UNSTABLE


def stability_of(delta_eq: float, model, gains: PiGains | None = None) -> Stability:
    """Local stability of the equilibrium at ``(delta_eq, x_int=0)``.

    ``model`` is either a concrete parameter object exposing ``jacobian`` or
    a :class:`LurePiPlant` accompanied by ``gains``.
    """
    if isinstance(model, LurePiPlant):
        if gains is None:
            raise TypeError("gains are required for an abstract plant")
        return classify_jacobian(pi_jacobian(model, gains, delta_eq))
    return classify_jacobian(model.jacobian(delta_eq, 0.0))
