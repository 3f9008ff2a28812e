"""Concrete PI-synchronised inverter models.

Conventions: angles in rad, time in s, electrical quantities in per-unit.
The frequency deviation ``omega`` is in rad/s, and controller gains are
rad/s of output per per-unit of error. The line inductance in per-unit
equals ``X_g``.

GFL (PLL) loop, error ``v_q``::

    v_q = X_g I_d + R_g I_q - U_g sin(delta) + omega X_g I_d / omega_b
    omega = k_p v_q + x_int          (algebraic loop, solved in closed form)
    d(x_int)/dt = k_i v_q

DC-voltage GFM loop, error ``P_in - P_e``. The DC capacitor integrates the
power imbalance, ``(C_dc / (2 omega_b)) d(v_dc^2)/dt = P_in - P_e``. The
integrator state is ``x_int = k_i (v_dc^2 - V_dc_ref^2)``, so the
effective integral gain of the loop is ``2 omega_b k_i / C_dc``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from . import _kernels as K
from .energy import LurePiPlant, PiGains, SysState
from .errors import ConfigError, EquilibriumLost

Phase = Literal["pre", "during", "post"]


@dataclass(frozen=True)
class GridParams:
    R_g: float
    X_g: float
    U_g: float
    omega_b: float = 2 * math.pi * 50
    # set only on faulted copies so the post-fault phase restores exactly
    prefault_U_g: float | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.X_g > 0:
            raise ConfigError(f"X_g must be positive, got {self.X_g}")
        if not self.U_g >= 0:
            raise ConfigError(f"U_g must be non-negative, got {self.U_g}")
        if not self.R_g >= 0:
            raise ConfigError(f"R_g must be non-negative, got {self.R_g}")
        if not self.omega_b > 0:
            raise ConfigError(f"omega_b must be positive, got {self.omega_b}")

    @property
    def Z2(self) -> float:
        return self.R_g ** 2 + self.X_g ** 2


@dataclass(frozen=True)
class FaultScenario:
    """A grid-voltage sag over ``[t_start, t_clear]``.

    With ``sag_mode="residual"`` the grid voltage sags *to* ``sag_depth``.
    With ``"drop"`` it sags *by* ``sag_depth``.
    """

    sag_depth: float
    t_start: float = 0.0
    t_clear: float = 0.0
    t_end: float = 2.0
    sag_mode: Literal["residual", "drop"] = "residual"

    def __post_init__(self):
        if self.sag_mode not in ("residual", "drop"):
            raise ConfigError(f"unknown sag_mode {self.sag_mode!r}")
        if not self.sag_depth >= 0:
            raise ConfigError(f"sag_depth must be non-negative, got {self.sag_depth}")
        if not (0 <= self.t_start <= self.t_clear <= self.t_end):
            raise ConfigError(
                "need 0 <= t_start <= t_clear <= t_end, got "
                f"{self.t_start}, {self.t_clear}, {self.t_end}")

    @property
    def duration(self) -> float:
        return self.t_clear - self.t_start

    def with_duration(self, duration: float) -> FaultScenario:
        return replace(self, t_clear=self.t_start + duration)

    def fault_voltage(self, U_g: float) -> float:
        if self.sag_mode == "residual":
            if self.sag_depth > U_g:
                raise ConfigError(f"residual voltage {self.sag_depth} exceeds U_g={U_g}")
            return self.sag_depth
        if self.sag_depth >= U_g:
            raise ConfigError(f"sag depth {self.sag_depth} must stay below U_g={U_g}")
        return U_g - self.sag_depth


class _Model:
    """Behaviour shared by both inverter models."""

    KIND: int
    grid: GridParams

    def with_grid_voltage(self, U_g: float):
        return replace(self, grid=replace(self.grid, U_g=U_g))

    @property
    def omega_tol(self) -> float:
        """1e-3 pu of frequency, in rad/s."""
        return 1e-3 * self.grid.omega_b

    def dynamics(self, state: SysState, limiter: bool = False) -> tuple[float, float]:
        dd, dx = K.rhs(self.KIND, state.delta, state.x_int, self.kernel_vector(limiter))
        return dd, dx

    def equilibria(self):
        from .equilibrium import solve_equilibria
        return solve_equilibria(self.plant(), seeds=self.equilibrium_seeds())

    def _anchor(self, delta_sep, delta_uep=None, need_uep=False):
        if delta_sep is None or (need_uep and delta_uep is None):
            eq = self.equilibria()
            if not eq.exists:
                raise EquilibriumLost("no equilibrium for the energy anchor")
            delta_sep = eq.delta_sep if delta_sep is None else delta_sep
            delta_uep = eq.delta_uep if delta_uep is None else delta_uep
        return delta_sep, delta_uep


@dataclass(frozen=True)
class GflParams(_Model):
    grid: GridParams
    I_d: float
    I_q: float
    gains: PiGains
    omega_limit: float | None = 0.3  # pu
    feedthrough: bool = True

    KIND = K.GFL

    def __post_init__(self):
        if math.hypot(self.I_d, self.I_q) > 1.0 + 1e-12:
            raise ConfigError("current reference exceeds the 1 pu rating")
        if self.feedthrough and abs(1.0 - self.gains.k_p * self.c_ft_nominal) < 1e-9:
            raise ConfigError("singular PLL feedthrough loop: k_p X_g I_d / omega_b = 1")

    @property
    def c_ft_nominal(self) -> float:
        return self.grid.X_g * self.I_d / self.grid.omega_b

    @property
    def c_ft(self) -> float:
        """Feedthrough coefficient of omega into v_q (zero when disabled)."""
        return self.c_ft_nominal if self.feedthrough else 0.0

    @property
    def y_ref(self) -> float:
        return self.grid.X_g * self.I_d + self.grid.R_g * self.I_q

    @property
    def pi_gains(self) -> PiGains:
        return self.gains

    def plant(self) -> LurePiPlant:
        U = self.grid.U_g
        return LurePiPlant(f=lambda d: U * np.sin(d),
                           df_ddelta=lambda d: U * np.cos(d),
                           antiderivative_F=lambda d: -U * np.cos(d),
                           y_ref=self.y_ref)

    def equilibrium_seeds(self):
        U = self.grid.U_g
        if U <= 0 or abs(self.y_ref) > U:
            return None
        s = math.asin(self.y_ref / U)
        return s, math.pi - s

    def kernel_vector(self, limiter: bool = False) -> np.ndarray:
        g = self.grid
        lim = self.omega_limit * g.omega_b if (limiter and self.omega_limit) else np.inf
        return np.array([g.R_g, g.X_g, g.U_g, self.I_d, self.I_q,
                         self.gains.k_p, self.gains.k_i, self.c_ft, lim])

    def omega(self, delta, x_int, limiter: bool = False):
        return gfl_omega(delta, x_int, self, limiter)

    AXIS2 = "omega"

    def x_from_axis2(self, delta, a2):
        return self.x_from_omega(delta, a2)

    def x_from_omega(self, delta, omega):
        """Integrator state that produces frequency ``omega`` at ``delta``."""
        return omega - self.gains.k_p * gfl_vq(delta, omega, self)

    def jacobian(self, delta: float, x_int: float = 0.0) -> np.ndarray:
        kp, ki, c = self.gains.k_p, self.gains.k_i, self.c_ft
        s = 1.0 - kp * c
        ucos = self.grid.U_g * math.cos(delta)
        return np.array([[-kp * ucos / s, 1.0 / s],
                         [-ki * ucos / s, ki * c / s]])

    def energy(self, delta, x_int, delta_sep=None, delta_uep=None):
        return gfl_energy(delta, x_int, self, delta_uep, delta_sep)

    def classical_energy(self, delta, omega, delta_sep=None):
        """Swing-analogy energy ``omega^2 / (2 k_i) + V(delta)``."""
        delta_sep, _ = self._anchor(delta_sep)
        return omega * omega / (2 * self.gains.k_i) + self.plant().potential(delta, delta_sep)


@dataclass(frozen=True)
class GfmParams(_Model):
    grid: GridParams
    E: float
    P_in: float
    gains: PiGains
    C_dc: float
    V_dc_ref: float
    dc_report_factor: float = 1.0
    omega_limit: float | None = None  # pu

    KIND = K.GFM

    def __post_init__(self):
        if not self.E > 0:
            raise ConfigError(f"E must be positive, got {self.E}")
        if not self.C_dc > 0:
            raise ConfigError(f"C_dc must be positive, got {self.C_dc}")

    @property
    def integral_gain(self) -> float:
        return 2.0 * self.grid.omega_b * self.gains.k_i / self.C_dc

    @property
    def pi_gains(self) -> PiGains:
        return PiGains(self.gains.k_p, self.integral_gain)

    @property
    def y_ref(self) -> float:
        return self.P_in

    def plant(self) -> LurePiPlant:
        g, E = self.grid, self.E
        a = g.X_g * E * g.U_g / g.Z2
        b = g.R_g / g.Z2

        return LurePiPlant(
            f=lambda d: gfm_pe(d, self),
            df_ddelta=lambda d: a * np.cos(d) + b * E * g.U_g * np.sin(d),
            antiderivative_F=lambda d: -a * np.cos(d) + b * (E * E * d - E * g.U_g * np.sin(d)),
            y_ref=self.P_in)

    def equilibrium_seeds(self):
        # X sin(d) - R cos(d) = r  <=>  |Z| sin(d - phi) = r
        g = self.grid
        if g.U_g <= 0:
            return None
        r = (self.P_in * g.Z2 - g.R_g * self.E ** 2) / (self.E * g.U_g)
        z = math.sqrt(g.Z2)
        if abs(r) > z:
            return None
        phi = math.atan2(g.R_g, g.X_g)
        s = math.asin(r / z)
        return phi + s, phi + math.pi - s

    def kernel_vector(self, limiter: bool = False) -> np.ndarray:
        g = self.grid
        lim = self.omega_limit * g.omega_b if (limiter and self.omega_limit) else np.inf
        return np.array([g.R_g, g.X_g, g.U_g, self.E, self.P_in,
                         self.gains.k_p, self.integral_gain, lim])

    def omega(self, delta, x_int, limiter: bool = False):
        w = self.gains.k_p * (self.P_in - gfm_pe(delta, self)) + x_int
        if limiter and self.omega_limit:
            lim = self.omega_limit * self.grid.omega_b
            w = np.clip(w, -lim, lim)
        return w

    def jacobian(self, delta: float, x_int: float = 0.0) -> np.ndarray:
        dpe = float(self.plant().df_ddelta(delta))
        kp, ki = self.gains.k_p, self.integral_gain
        return np.array([[-kp * dpe, 1.0], [-ki * dpe, 0.0]])

    def energy(self, delta, x_int, delta_sep=None, delta_uep=None):
        return gfm_energy(delta, x_int, self, delta_sep)

    AXIS2 = "delta_vdc_sq"

    def x_from_axis2(self, delta, a2):
        return self.x_from_delta_vdc_sq(a2)

    def delta_vdc_sq(self, x_int):
        """Squared DC-voltage error ``v_dc^2 - V_dc_ref^2`` implied by ``x_int``."""
        return self.dc_report_factor * x_int / self.gains.k_i

    def x_from_delta_vdc_sq(self, dv2):
        return dv2 * self.gains.k_i / self.dc_report_factor

    def dc_voltage(self, x_int):
        return np.sqrt(self.V_dc_ref ** 2 + self.delta_vdc_sq(x_int))


def gfl_vq(delta, omega, p: GflParams):
    g = p.grid
    return p.y_ref - g.U_g * np.sin(delta) + omega * p.c_ft


def gfl_omega(delta, x_int, p: GflParams, limiter: bool = False):
    """Closed-form solution of ``omega = k_p v_q(delta, omega) + x_int``."""
    kp = p.gains.k_p
    vq0 = p.y_ref - p.grid.U_g * np.sin(delta)
    w = (kp * vq0 + x_int) / (1.0 - kp * p.c_ft)
    if limiter and p.omega_limit:
        lim = p.omega_limit * p.grid.omega_b
        w = np.clip(w, -lim, lim)
    return w


def gfl_dynamics(state: SysState, p: GflParams, limiter: bool = False) -> tuple[float, float]:
    return p.dynamics(state, limiter)


def gfl_energy(delta, x_int, p: GflParams, delta_uep=None, delta_sep=None):
    """PI energy of the PLL including the line-dynamics path term.

    The path integral ``int omega X_g I_d / omega_b d(delta)`` is replaced by
    its straight-line estimate from the UEP, ``-omega (delta_uep - delta) / 2
    * X_g I_d / omega_b``. It vanishes when ``omega = 0`` or feedthrough is
    disabled.
    """
    delta_sep, delta_uep = p._anchor(delta_sep, delta_uep, need_uep=True)
    w = gfl_omega(delta, x_int, p)
    path = w * (delta_uep - delta) / 2.0 * p.c_ft
    return x_int * x_int / (2 * p.gains.k_i) + p.plant().potential(delta, delta_sep) + path


def gfm_pe(delta, p: GfmParams):
    g, E = p.grid, p.E
    return (g.X_g * E * g.U_g * np.sin(delta)
            + g.R_g * (E * E - E * g.U_g * np.cos(delta))) / g.Z2


def gfm_dynamics(state: SysState, p: GfmParams, limiter: bool = False) -> tuple[float, float]:
    return p.dynamics(state, limiter)


def gfm_energy(delta, x_int, p: GfmParams, delta_sep=None):
    delta_sep, _ = p._anchor(delta_sep)
    return x_int * x_int / (2 * p.integral_gain) + p.plant().potential(delta, delta_sep)


def apply_fault(params, scenario: FaultScenario, phase: Phase):
    """Parameters in force during ``phase`` of ``scenario``."""
    if phase not in ("pre", "during", "post"):
        raise ConfigError(f"unknown phase {phase!r}")
    g = params.grid
    nominal = g.prefault_U_g if g.prefault_U_g is not None else g.U_g
    if phase == "during":
        U = scenario.fault_voltage(nominal)
        return replace(params, grid=replace(g, U_g=U, prefault_U_g=nominal))
    if g.prefault_U_g is None:
        return params
    return replace(params, grid=replace(g, U_g=nominal, prefault_U_g=None))


def table_a1_grid() -> GridParams:
    return GridParams(R_g=0.08, X_g=0.5, U_g=1.0, omega_b=2 * math.pi * 50)


def gfl_table_a1() -> GflParams:
    return GflParams(grid=table_a1_grid(), I_d=1.0, I_q=0.0,
                     gains=PiGains(k_p=10 * 2 * math.pi, k_i=1000 * 2 * math.pi),
                     omega_limit=0.3, feedthrough=True)


def gfm_table_a1() -> GfmParams:
    return GfmParams(grid=table_a1_grid(), E=1.0, P_in=1.0,
                     gains=PiGains(k_p=2 * 2 * math.pi, k_i=15.0),
                     C_dc=12.5, V_dc_ref=2.5)


def table_a1_scenario(t_clear: float = 0.0, t_end: float = 2.0) -> FaultScenario:
    return FaultScenario(sag_depth=0.1, t_start=0.0, t_clear=t_clear, t_end=t_end)


def preset(kind: str):
    try:
        return {"gfl": gfl_table_a1, "gfm": gfm_table_a1}[kind]()
    except KeyError:
        raise ConfigError(f"unknown model kind {kind!r}; expected 'gfl' or 'gfm'") from None
