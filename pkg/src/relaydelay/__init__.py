"""Relay hysteresis-delay differential equations.

Simulation of ``u'(t) = k H(Mu)(t) - B u(t) + A u(t - 2T)`` with a
two-threshold nonideal relay ``H``, construction of symmetric 2T-periodic
orbits, the formal linearization of the associated Poincare map in
Sobolev-Slobodeckij spaces, and orbital-stability verdicts via a
finite-dimensional operator-pencil reduction of its spectrum.
"""

from .core import (
    GridFunction,
    HistoryFunction,
    ParamError,
    Segment,
    SystemParams,
    Trajectory,
    eval_history,
    validate_params,
)
from .hysteresis import RelayState, relay_advance, relay_init
from .integrator import (
    BranchFlow,
    FlowSolution,
    IntegrationError,
    flow_psi,
    hit_time,
    integrate,
    step_fixed_branch,
)
from .maps import (
    CrossSectionPoint,
    MapError,
    ReducedPoint,
    hit_map,
    lift_DR,
    lift_R,
    orbit_distance,
    pi_alpha,
    pi_beta,
    pi_composition,
    pi_map,
    poincare,
    poincare_decay,
    poincare_iterates,
    project_E,
    project_E_full,
)
from .norms import (
    LinComb,
    NormSettings,
    OrderFit,
    appendix_probe,
    composite_norm,
    estimate_order,
    fractional_norm,
    fractional_seminorm,
    lp_norm,
    w1p_norm,
)
from .periodic import (
    OrbitError,
    OrbitReport,
    PeriodicOrbit,
    find_periodic_orbit,
    verify_orbit,
)
from .linearization import LinearizedMaps, gamma_exponent, hit_time_exponent
from .spectrum import (
    Eigenpair,
    PencilModel,
    ProductVector,
    SpectrumError,
    Verdict,
    apply_V,
    build_pencil,
    dense_eigenvalues,
    dense_matrix,
    eigenpair_residual,
    find_eigenvalues,
    pencil_det,
    pencil_matrix,
    resolve_calV,
    stability_verdict,
    u_inverse,
    u_transform,
    volterra_inverse,
)
from . import systems

__version__ = "0.1.0"
