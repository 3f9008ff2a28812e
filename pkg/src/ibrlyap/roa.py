"""Region-of-attraction estimates from energy level sets, and a brute-force
simulation oracle to check them against.

The second grid axis is the frequency deviation ``omega`` (rad/s) for the
GFL model and the squared DC-voltage error ``v_dc^2 - V_dc_ref^2`` for the
GFM model.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage import measure

from . import _kernels as K
from .errors import ConfigError, EquilibriumLost
from .models import FaultScenario, GflParams, table_a1_scenario
from .sim import (ANGLE_TOL, DEFAULT_STEP, DIVERGENCE_BOUND, DWELL, cct_energy_criterion,
                  critical_energy as _critical_energy, simulate_fault)

THREADS_ENV = "IBRLYAP_THREADS"


def configure_threads() -> int:
    """Cap numba's parallel fan-out from ``IBRLYAP_THREADS`` if set."""
    import numba
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()


@dataclass(frozen=True)
class GridSpec:
    delta_min: float
    delta_max: float
    n_delta: int
    axis2_min: float
    axis2_max: float
    n_axis2: int

    def __post_init__(self):
        if self.n_delta < 2 or self.n_axis2 < 2:
            raise ConfigError("a grid needs at least two points per axis")
        if not (self.delta_max > self.delta_min and self.axis2_max > self.axis2_min):
            raise ConfigError("grid bounds must be increasing")

    @property
    def delta(self) -> np.ndarray:
        return np.linspace(self.delta_min, self.delta_max, self.n_delta)

    @property
    def axis2(self) -> np.ndarray:
        return np.linspace(self.axis2_min, self.axis2_max, self.n_axis2)

    def mesh(self):
        return np.meshgrid(self.delta, self.axis2, indexing="ij")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RoaEstimate:
    w_cri: float
    grid: GridSpec
    W: np.ndarray
    inside: np.ndarray
    contour: list[np.ndarray]
    axis2_name: str
    method: str = "pi"

    @property
    def area_fraction(self) -> float:
        return float(self.inside.mean())


@dataclass
class RoaOracle:
    grid: GridSpec
    codes: np.ndarray

    @property
    def converged(self) -> np.ndarray:
        return self.codes == K.STABLE

    @property
    def diverged(self) -> np.ndarray:
        return self.codes == K.UNSTABLE

    @property
    def indeterminate(self) -> np.ndarray:
        return self.codes == K.INDETERMINATE


@dataclass
class ContainmentReport:
    violations: int
    coverage: float
    conservative_coverage: float
    indeterminate_inside: int
    violation_points: np.ndarray
    missed_points: np.ndarray

    def summary(self) -> dict:
        return {"violations": self.violations, "coverage": self.coverage,
                "conservative_coverage": self.conservative_coverage,
                "indeterminate_inside": self.indeterminate_inside}


def critical_energy(params) -> float:
    """Energy at ``(delta_uep, x_int=0)`` under ``params``, anchored at the SEP."""
    return _critical_energy(params)


def default_grid(params, n: int = 201, scenario: FaultScenario | None = None,
                 step: float = DEFAULT_STEP) -> GridSpec:
    """Grid over ``[delta_sep - pi, delta_uep + pi/2]`` and a model-specific
    second axis (see module docstring)."""
    eq = params.equilibria()
    if not eq.exists:
        raise EquilibriumLost("no equilibrium to centre the grid on")
    if isinstance(params, GflParams):
        lim = (params.omega_limit or 0.3) * params.grid.omega_b
        a_lo, a_hi = -lim, lim
    else:
        x_max = _fault_x_max(params, scenario or table_a1_scenario(), step)
        a = abs(float(params.delta_vdc_sq(1.5 * x_max)))
        a_lo, a_hi = -a, a
    return GridSpec(eq.delta_sep - math.pi, eq.delta_uep + math.pi / 2, n, a_lo, a_hi, n)


def _fault_x_max(params, scenario, step):
    cct = cct_energy_criterion(params, scenario, step, limiter=False)
    if cct is None:
        # fall back to the integrator range of the level set itself
        return math.sqrt(2 * params.pi_gains.k_i * critical_energy(params))
    traj = simulate_fault(params, scenario.with_duration(cct), step, limiter=False,
                          record_every=10)
    return float(np.max(np.abs(traj.x_int)))


def _state_grid(params, grid: GridSpec):
    dd, aa = grid.mesh()
    return dd, aa, params.x_from_axis2(dd, aa)


def _sep_index(grid: GridSpec, delta_sep: float):
    if not (grid.delta_min <= delta_sep <= grid.delta_max and grid.axis2_min <= 0 <= grid.axis2_max):
        raise ConfigError("the grid does not contain the SEP; widen the grid")
    i = int(np.argmin(np.abs(grid.delta - delta_sep)))
    j = int(np.argmin(np.abs(grid.axis2)))
    return i, j


def _extract(W, w_cri, grid, eq, method, axis2_name):
    dd = grid.mesh()[0]
    below = (W < w_cri) & (dd < eq.delta_uep)
    labels, _ = ndimage.label(below)
    i, j = _sep_index(grid, eq.delta_sep)
    if not below[i, j]:
        raise ConfigError("the SEP is not inside the grid's sublevel set; widen the grid")
    inside = labels == labels[i, j]
    # raise everything outside the SEP component above the level so the only
    # iso-line left is the component boundary
    hi = max(float(np.nanmax(W)), w_cri) + 1.0
    field = np.where(inside, W, np.where(W < w_cri, hi, W))
    contour = []
    for c in measure.find_contours(field, w_cri):
        pts = np.column_stack([
            grid.delta_min + c[:, 0] * (grid.delta_max - grid.delta_min) / (grid.n_delta - 1),
            grid.axis2_min + c[:, 1] * (grid.axis2_max - grid.axis2_min) / (grid.n_axis2 - 1)])
        contour.append(pts)
    contour.sort(key=len, reverse=True)
    return RoaEstimate(w_cri, grid, W, inside, contour, axis2_name, method)


def level_set(params, w_cri: float | None = None, grid: GridSpec | None = None) -> RoaEstimate:
    """SEP component of ``{W < w_cri}`` on ``grid`` plus its boundary polyline."""
    eq = params.equilibria()
    if not eq.exists:
        raise EquilibriumLost("no equilibrium; the level set is undefined")
    w_cri = critical_energy(params) if w_cri is None else w_cri
    grid = grid or default_grid(params)
    dd, _, xx = _state_grid(params, grid)
    W = params.energy(dd, xx, eq.delta_sep, eq.delta_uep)
    return _extract(W, w_cri, grid, eq, "pi", params.AXIS2)


def classical_level_set_gfl(params: GflParams, grid: GridSpec | None = None) -> RoaEstimate:
    """Swing-analogy estimate ``omega^2/(2 k_i) + V(delta) < W_cri`` for the PLL."""
    if not isinstance(params, GflParams):
        raise ConfigError("the classical comparison is defined for the GFL model only")
    eq = params.equilibria()
    if not eq.exists:
        raise EquilibriumLost("no equilibrium; the level set is undefined")
    grid = grid or default_grid(params)
    dd, aa = grid.mesh()
    W = params.classical_energy(dd, aa, eq.delta_sep)
    w_cri = float(params.classical_energy(eq.delta_uep, 0.0, eq.delta_sep))
    return _extract(W, w_cri, grid, eq, "classical", params.AXIS2)


def oracle_step(params, cap: float = 10 * DEFAULT_STEP) -> float:
    """RK4 step keeping ``h * |lambda|`` below 0.02 at both equilibria."""
    eq = params.equilibria()
    rho = max(np.max(np.abs(np.linalg.eigvals(params.jacobian(d, 0.0))))
              for d in (eq.delta_sep, eq.delta_uep))
    return min(cap, 0.02 / rho)


def roa_oracle(params, grid: GridSpec | None = None, step: float | None = None,
               t_end: float = 2.0, limiter: bool = False) -> RoaOracle:
    """Simulate every grid point under ``params`` and record its fate.

    ``step`` defaults to :func:`oracle_step`; the grid dynamics are far slower
    than the 10 us step used for fault transients.
    """
    eq = params.equilibria()
    if not eq.exists:
        raise EquilibriumLost("no equilibrium to converge to")
    grid = grid or default_grid(params)
    step = oracle_step(params) if step is None else step
    configure_threads()
    dd, _, xx = _state_grid(params, grid)
    codes = K.settle_many(params.KIND, params.kernel_vector(limiter),
                          np.ascontiguousarray(dd.ravel()), np.ascontiguousarray(xx.ravel()),
                          step, t_end, eq.delta_sep, ANGLE_TOL, params.omega_tol, DWELL,
                          DIVERGENCE_BOUND)
    return RoaOracle(grid, codes.reshape(dd.shape))


def containment_report(estimate, oracle: RoaOracle) -> ContainmentReport:
    """Compare an estimate (RoaEstimate or boolean mask) with the oracle.

    ``coverage`` is estimate area over oracle-converged area;
    ``conservative_coverage`` counts only estimate points that converge.
    """
    inside = estimate.inside if isinstance(estimate, RoaEstimate) else np.asarray(estimate, bool)
    if inside.shape != oracle.codes.shape:
        raise ConfigError("estimate and oracle grids differ")
    dd, aa = oracle.grid.mesh()
    conv = oracle.converged
    viol = inside & oracle.diverged
    missed = conv & ~inside
    n_conv = max(int(conv.sum()), 1)
    return ContainmentReport(
        violations=int(viol.sum()),
        coverage=float(inside.sum() / n_conv),
        conservative_coverage=float((inside & conv).sum() / n_conv),
        indeterminate_inside=int((inside & oracle.indeterminate).sum()),
        violation_points=np.column_stack([dd[viol], aa[viol]]),
        missed_points=np.column_stack([dd[missed], aa[missed]]))


def write_contour_csv(est: RoaEstimate, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"segment,delta,{est.axis2_name}\n")
        for s, pts in enumerate(est.contour):
            for d, a in pts:
                fh.write("%d,%.9g,%.9g\n" % (s, d, a))


def write_mask_csv(est: RoaEstimate, path, oracle: RoaOracle | None = None,
                   extra: dict[str, np.ndarray] | None = None) -> None:
    dd, aa = est.grid.mesh()
    cols = {"delta": dd, est.axis2_name: aa, "W": est.W, "inside": est.inside.astype(int)}
    if oracle is not None:
        cols["oracle"] = oracle.codes.astype(int)
    cols.update(extra or {})
    names = list(cols)
    flat = [np.asarray(cols[k]).ravel() for k in names]
    fmt = ",".join("%d" if np.issubdtype(f.dtype, np.integer) else "%.9g" for f in flat)
    with open(path, "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*flat):
            fh.write(fmt % row + "\n")


def write_json(obj: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
