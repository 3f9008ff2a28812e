"""Energy functions for the two canonical synchronising loops.

Both loops drive a static nonlinearity ``f(delta)`` with the error
``y = y_ref - f(delta)``:

* LPF loop (swing form)::

      d(delta)/dt = omega
      J d(omega)/dt = y - D omega

  with the classical energy ``W = J omega^2 / 2 + V(delta)``.

* PI loop::

      omega = k_p y + x_int
      d(x_int)/dt = k_i y
      d(delta)/dt = omega

  with the energy ``W = x_int^2 / (2 k_i) + V(delta)``, whose time
  derivative is ``-k_p y^2`` everywhere.

In both cases the potential is ``V(delta) = -int_{delta_ref}^{delta} y ds``,
anchored so that ``V(delta_ref) = 0``.

Functions accept scalars or numpy arrays for the angle and state arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError

ArrayLike = float | np.ndarray


@dataclass(frozen=True)
class PiGains:
    k_p: float
    k_i: float

    def __post_init__(self):
        # k_p = 0 is admitted for boundary studies (undamped loop)
        if not (np.isfinite(self.k_p) and self.k_p >= 0):
            raise DomainError(f"k_p must be finite and non-negative, got {self.k_p}")
        if not (np.isfinite(self.k_i) and self.k_i > 0):
            raise DomainError(f"k_i must be finite and positive, got {self.k_i}")


@dataclass(frozen=True)
class LpfGains:
    J: float
    D: float

    def __post_init__(self):
        if not self.J > 0:
            raise DomainError(f"J must be positive, got {self.J}")
        if not self.D >= 0:
            raise DomainError(f"D must be non-negative, got {self.D}")


@dataclass(frozen=True)
class LurePiPlant:
    """Static nonlinearity of a Lur'e loop together with its reference.

    ``antiderivative_F`` must satisfy ``F'(delta) = f(delta)``; it is supplied
    in closed form by each concrete model so energies need no quadrature.
    """

    f: Callable[[ArrayLike], ArrayLike]
    df_ddelta: Callable[[ArrayLike], ArrayLike]
    antiderivative_F: Callable[[ArrayLike], ArrayLike]
    y_ref: float

    def error(self, delta):
        return self.y_ref - self.f(delta)

    def potential(self, delta, delta_ref: float):
        """``-int_{delta_ref}^{delta} (y_ref - f) ds``."""
        return -(self.y_ref * (delta - delta_ref)
                 - (self.antiderivative_F(delta) - self.antiderivative_F(delta_ref)))

    def check(self, deltas=None, rtol: float = 1e-6, h: float = 1e-5) -> None:
        """Verify F' = f and f' = df_ddelta by central differences.

        Raises DomainError on the first mismatch.
        """
        if deltas is None:
            deltas = np.linspace(-np.pi, 3 * np.pi, 1000)
        deltas = np.asarray(deltas, dtype=float)
        for name, g, dg in (("antiderivative_F", self.antiderivative_F, self.f),
                            ("df_ddelta", self.f, self.df_ddelta)):
            num = (np.asarray(g(deltas + h)) - np.asarray(g(deltas - h))) / (2 * h)
            ref = np.asarray(dg(deltas))
            err = np.abs(num - ref) / np.maximum(1.0, np.abs(ref))
            if np.max(err) > rtol:
                k = int(np.argmax(err))
                raise DomainError(
                    f"{name} inconsistent at delta={deltas[k]:.6g}: "
                    f"relative error {err[k]:.3g} > {rtol:g}")


@dataclass(frozen=True)
class SysState:
    delta: float
    x_int: float
    t: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.delta, self.x_int, self.t)):
            raise DomainError(f"non-finite state {self}")


@dataclass(frozen=True)
class EquivSwing:
    """Swing-equation reading of the PI loop: inertia 1/k_i and an
    angle-dependent damping (k_p/k_i) f'(delta)."""

    J_eq: float
    D_eq: float
    delta: float


def _finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DomainError(f"non-finite input {v!r}")


def pi_omega(state: SysState, plant: LurePiPlant, gains: PiGains) -> float:
    """Frequency deviation produced by the PI loop, ``k_p y + x_int``."""
    _finite(state.delta, state.x_int)
    return gains.k_p * plant.error(state.delta) + state.x_int


def pi_dynamics(state: SysState, plant: LurePiPlant, gains: PiGains) -> tuple[float, float]:
    """Right-hand side ``(d delta/dt, d x_int/dt)`` of the canonical PI loop."""
    y = plant.error(state.delta)
    return gains.k_p * y + state.x_int, gains.k_i * y


def pi_energy(state: SysState, plant: LurePiPlant, gains: PiGains, delta_ref: float):
    return pi_energy_xy(state.delta, state.x_int, plant, gains, delta_ref)


def pi_energy_xy(delta, x_int, plant: LurePiPlant, gains: PiGains, delta_ref: float):
    """Array form of :func:`pi_energy` over ``(delta, x_int)``."""
    x_int = np.asarray(x_int, dtype=float) if np.ndim(x_int) else x_int
    return x_int * x_int / (2.0 * gains.k_i) + plant.potential(delta, delta_ref)


def pi_energy_rate(state: SysState, plant: LurePiPlant, gains: PiGains) -> float:
    y = plant.error(state.delta)
    return -gains.k_p * y * y


def lpf_dynamics(delta, omega, plant: LurePiPlant, lpf: LpfGains) -> tuple[float, float]:
    return omega, (plant.error(delta) - lpf.D * omega) / lpf.J


def lpf_energy(delta, omega, plant: LurePiPlant, lpf: LpfGains, delta_ref: float):
    return 0.5 * lpf.J * omega * omega + plant.potential(delta, delta_ref)


def lpf_energy_rate(omega, lpf: LpfGains):
    return -lpf.D * omega * omega


def equivalent_swing(plant: LurePiPlant, gains: PiGains, delta: float) -> EquivSwing:
    return EquivSwing(J_eq=1.0 / gains.k_i,
                      D_eq=gains.k_p / gains.k_i * plant.df_ddelta(delta),
                      delta=delta)
