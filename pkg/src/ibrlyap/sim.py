"""Time-domain simulation through fault scenarios and CCT estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .energy import SysState
from .equilibrium import EquilibriumPair, Stability
from .errors import ConfigError, EquilibriumLost
from .models import FaultScenario, apply_fault

DEFAULT_STEP = 1e-5
DIVERGENCE_BOUND = 50.0
ANGLE_TOL = 1e-3
DWELL = 0.05
WINDOW_FRACTION = 0.2
BISECTION_TOL = 1e-4

PHASE_NAMES = ("pre", "during", "post")

_VERDICT = {K.STABLE: Stability.STABLE, K.UNSTABLE: Stability.UNSTABLE,
            K.INDETERMINATE: Stability.INDETERMINATE}


@dataclass
class Trajectory:
    t: np.ndarray
    delta: np.ndarray
    x_int: np.ndarray
    omega: np.ndarray
    W: np.ndarray
    phase: np.ndarray
    delta_sep: float
    t_start: float
    t_clear: float
    t_end: float
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.size

    def state(self, k: int) -> SysState:
        return SysState(float(self.delta[k]), float(self.x_int[k]), float(self.t[k]))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,delta,omega,x_int,W,phase\n")
            for row in zip(self.t, self.delta, self.omega, self.x_int, self.W, self.phase):
                fh.write("%.9g,%.9g,%.9g,%.9g,%.9g,%s\n" % (*row[:5], PHASE_NAMES[row[5]]))


@dataclass(frozen=True)
class CctResult:
    cct_energy: float | None
    cct_sim: float | None
    w_cri: float

    @property
    def conservative(self) -> bool:
        if self.cct_energy is None or self.cct_sim is None:
            return True
        return self.cct_energy <= self.cct_sim + BISECTION_TOL


def _segments(bounds: list[float], h: float):
    n, hlast = [], []
    for a, b in zip(bounds[:-1], bounds[1:]):
        dur = b - a
        k = int(math.ceil(dur / h - 1e-9)) if dur > 0 else 0
        n.append(k)
        hlast.append(dur - (k - 1) * h if k else h)
    return np.array(n, dtype=np.int64), np.array(hlast)


def _check_step(step: float):
    if not (step > 0 and math.isfinite(step)):
        raise ConfigError(f"integration step must be positive, got {step}")


def _run(kind, pmats, bounds, phases, d0, x0, step, stride):
    keep = [i for i in range(len(pmats)) if bounds[i + 1] > bounds[i]]
    if not keep:
        keep = [0]
    pm = np.ascontiguousarray([pmats[i] for i in keep])
    seg_t = np.array([bounds[keep[0]]] + [bounds[i + 1] for i in keep])
    seg_n, seg_h = _segments(list(seg_t), step)
    t, d, x, w, s, n, div = K.integrate_segments(kind, pm, seg_t, seg_n, seg_h,
                                                  float(d0), float(x0), step,
                                                  DIVERGENCE_BOUND, int(stride))
    phase = np.asarray(phases)[np.asarray(keep)][s[:n]]
    return t[:n], d[:n], x[:n], w[:n], phase, div


def _energy(energy_params, delta, x_int, eq: EquilibriumPair):
    if not eq.exists:
        return np.full_like(delta, np.nan)
    return energy_params.energy(delta, x_int, eq.delta_sep, eq.delta_uep)


def integrate(model, state0: SysState, t_span: tuple[float, float], step: float = DEFAULT_STEP,
              limiter: bool = False, energy_model=None, record_every: int = 1) -> Trajectory:
    """Fixed-step RK4 integration of one parameter set over ``t_span``.

    Energy is reported with ``energy_model`` (defaults to ``model``),
    anchored at that model's SEP.
    """
    _check_step(step)
    t0, t1 = t_span
    if t1 < t0:
        raise ConfigError("t_span must be increasing")
    t, d, x, w, phase, div = _run(model.KIND, [model.kernel_vector(limiter)], [t0, t1],
                                  [2], state0.delta, state0.x_int, step, record_every)
    emodel = energy_model or model
    eq = emodel.equilibria()
    return Trajectory(t, d, x, w, _energy(emodel, d, x, eq), phase,
                      eq.delta_sep, t0, t0, t1, div,
                      meta={"limiter": limiter, "step": step, "omega_b": model.grid.omega_b})


def prefault_sep(params, scenario: FaultScenario) -> float:
    eq = apply_fault(params, scenario, "pre").equilibria()
    if not eq.exists:
        raise ConfigError("no pre-fault stable equilibrium")
    return eq.delta_sep


def simulate_fault(params, scenario: FaultScenario, step: float = DEFAULT_STEP,
                   limiter: bool = True, record_every: int = 1) -> Trajectory:
    """Pre-fault SEP -> sag over [t_start, t_clear] -> restored grid until t_end.

    ``W`` is the post-fault energy at every sample.
    """
    _check_step(step)
    pre = apply_fault(params, scenario, "pre")
    during = apply_fault(params, scenario, "during")
    post = apply_fault(during, scenario, "post")
    d0 = prefault_sep(params, scenario)
    bounds = [0.0, scenario.t_start, scenario.t_clear, scenario.t_end]
    t, d, x, w, phase, div = _run(
        params.KIND, [p.kernel_vector(limiter) for p in (pre, during, post)], bounds,
        [0, 1, 2], d0, 0.0, step, record_every)
    eq = post.equilibria()
    return Trajectory(t, d, x, w, _energy(post, d, x, eq), phase, eq.delta_sep,
                      scenario.t_start, scenario.t_clear, scenario.t_end, div,
                      meta={"limiter": limiter, "step": step, "omega_b": params.grid.omega_b})


def classify_stability(traj: Trajectory, sep: float | None = None,
                       window: float | None = None, tol: float = ANGLE_TOL,
                       omega_tol: float | None = None) -> Stability:
    """Verdict from the final ``window`` seconds of a trajectory.

    Stable iff angle and frequency stay within tolerance of the SEP there.
    Unstable on divergence, on ending more than a turn away from the SEP,
    or on settling at a neighbouring SEP lift. Otherwise indeterminate.
    """
    sep = traj.delta_sep if sep is None else sep
    if traj.diverged:
        return Stability.UNSTABLE
    if omega_tol is None:
        omega_tol = tol * traj.meta.get("omega_b", 2 * math.pi * 50)
    horizon = traj.t_end - traj.t[0]
    if window is None:
        window = WINDOW_FRACTION * horizon
    sel = traj.t >= traj.t_end - window - 1e-12
    if traj.t[-1] < traj.t_end - 1e-12 or not np.any(sel):
        return Stability.INDETERMINATE
    dd = traj.delta[sel] - sep
    ww = traj.omega[sel]
    if np.all(np.abs(dd) < tol) and np.all(np.abs(ww) < omega_tol):
        return Stability.STABLE
    if abs(dd[-1]) > 2 * math.pi:
        return Stability.UNSTABLE
    k = np.round(dd / (2 * math.pi))
    if k[-1] != 0 and np.all(np.abs(dd - k * 2 * math.pi) < tol) and np.all(np.abs(ww) < omega_tol):
        return Stability.UNSTABLE
    return Stability.INDETERMINATE


def fault_outcome(params, scenario: FaultScenario, step: float = DEFAULT_STEP,
                  limiter: bool = True) -> Stability:
    """Early-exit verdict for one clearing time (used by bisection)."""
    during = apply_fault(params, scenario, "during")
    post = apply_fault(during, scenario, "post")
    d0 = prefault_sep(params, scenario)
    eq = post.equilibria()
    if not eq.exists:
        raise EquilibriumLost("post-fault equilibrium does not exist")
    code = K.settle(params.KIND, during.kernel_vector(limiter), scenario.duration,
                    post.kernel_vector(limiter), d0, 0.0, step,
                    scenario.t_end - scenario.t_start, eq.delta_sep,
                    ANGLE_TOL, post.omega_tol, DWELL, DIVERGENCE_BOUND)
    return _VERDICT[int(code)]


def critical_energy(params) -> float:
    eq = params.equilibria()
    if not eq.exists:
        raise EquilibriumLost("no UEP: check equilibrium existence before asking for W_cri")
    return float(params.energy(eq.delta_uep, 0.0, eq.delta_sep, eq.delta_uep))


def cct_energy_criterion(params, scenario: FaultScenario, step: float = DEFAULT_STEP,
                         limiter: bool = True, w_cri: float | None = None,
                         chunk: float = 0.05) -> float | None:
    """First fault duration at which the post-fault energy reaches ``W_cri``.

    The sustained-fault trajectory is integrated from the pre-fault SEP and
    the crossing is located by linear interpolation between samples.
    Returns None when the energy never reaches the critical level within
    the horizon.
    """
    _check_step(step)
    during = apply_fault(params, scenario, "during")
    post = apply_fault(during, scenario, "post")
    eq = post.equilibria()
    if w_cri is None:
        w_cri = critical_energy(post)
    d, x = prefault_sep(params, scenario), 0.0
    pk = during.kernel_vector(limiter)
    t0 = scenario.t_start
    w_prev, t_prev = None, None
    while t0 < scenario.t_end - 1e-12:
        t1 = min(t0 + chunk, scenario.t_end)
        t, dd, xx, _, _, div = _run(params.KIND, [pk], [t0, t1], [1], d, x, step, 1)
        W = post.energy(dd, xx, eq.delta_sep, eq.delta_uep)
        if w_prev is not None:
            t, W = np.concatenate([[t_prev], t[1:]]), np.concatenate([[w_prev], W[1:]])
        hit = np.nonzero(W >= w_cri)[0]
        if hit.size:
            k = hit[0]
            if k == 0:
                return t[0] - scenario.t_start
            frac = (w_cri - W[k - 1]) / (W[k] - W[k - 1])
            return float(t[k - 1] + frac * (t[k] - t[k - 1]) - scenario.t_start)
        if div:
            return None
        d, x, w_prev, t_prev, t0 = dd[-1], xx[-1], W[-1], t[-1], t1
    return None


def cct_bisection(params, scenario: FaultScenario, tol: float = BISECTION_TOL,
                  step: float = DEFAULT_STEP, limiter: bool = True,
                  first_guess: float = 1e-3) -> float | None:
    """Largest fault duration found stable by simulation, to within ``tol``.

    The upper bracket is found by doubling from ``first_guess``; indeterminate
    verdicts count as not stable. Durations are capped so that at least
    ``DWELL`` seconds of post-fault time remain for the verdict. Returns None
    without a finite upper bracket.
    """
    max_dur = scenario.t_end - scenario.t_start - DWELL
    if max_dur <= 0:
        raise ConfigError("simulation horizon too short for a clearing-time search")

    def stable(dur):
        return fault_outcome(params, scenario.with_duration(dur), step, limiter) is Stability.STABLE

    lo, hi = 0.0, min(first_guess, max_dur)
    while stable(hi):
        if hi >= max_dur:
            return None
        lo, hi = hi, min(2 * hi, max_dur)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return lo


def critical_clearing(params, scenario: FaultScenario, step: float = DEFAULT_STEP,
                      limiter: bool = True, tol: float = BISECTION_TOL) -> CctResult:
    post = apply_fault(apply_fault(params, scenario, "during"), scenario, "post")
    w_cri = critical_energy(post)
    return CctResult(cct_energy_criterion(params, scenario, step, limiter, w_cri),
                     cct_bisection(params, scenario, tol, step, limiter), w_cri)
