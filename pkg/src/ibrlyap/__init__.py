"""Energy-function transient stability analysis for PI-synchronised inverters.

The PI loop ``omega = k_p y + x_int``, ``dx_int/dt = k_i y`` admits the energy
``W = x_int^2/(2 k_i) - int y d(delta)``. Its time derivative is
``-k_p y^2 <= 0``, so the UEP energy bounds a region of attraction. The
package applies this to a grid-following PLL and a DC-voltage-controlled
grid-forming inverter. It covers equilibria, ROA level sets against a
simulation oracle, and critical clearing times.
"""

from .energy import (EquivSwing, LpfGains, LurePiPlant, PiGains, SysState, equivalent_swing,
                     lpf_energy, lpf_energy_rate, pi_energy, pi_energy_rate, pi_omega)
from .equilibrium import EquilibriumPair, Stability, solve_equilibria, stability_of
from .errors import ConfigError, DomainError, EquilibriumLost, NumericError
from .models import (FaultScenario, GflParams, GfmParams, GridParams, apply_fault,
                     gfl_table_a1, gfm_table_a1, table_a1_scenario)
from .roa import (GridSpec, RoaEstimate, RoaOracle, classical_level_set_gfl,
                  containment_report, critical_energy, default_grid, level_set, roa_oracle)
from .sim import (CctResult, Trajectory, cct_bisection, cct_energy_criterion,
                  classify_stability, critical_clearing, integrate, simulate_fault)

__version__ = "0.1.0"
