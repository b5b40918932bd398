"""Geometry of isospectral density operators.

Co-adjoint orbits of U(n), their symplectic and Kähler structure, the
bundle U(n) -> U(n)/U(sigma), holonomy of unitary loops and the geometric
quantum speed limit.
"""

from .core import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DensityOperator,
    Spectrum,
    density_from_frame,
    expectation,
    expm_skew,
    haar_unitary,
    logm_unitary,
    make_spectrum,
    pure_state,
    random_observable,
    random_spectrum,
    random_stabilizer_unitary,
)
from .geometry import (
    BundleSplit,
    TangentVector,
    complex_structure,
    hamiltonian_pairing_check,
    hermitian_product,
    horizontal_basis,
    killing_pairing,
    kks_form,
    kks_metric,
    numerical_orbit_dimension,
    orbit_dimension,
    random_tangent,
    reductive_split,
    submersion_metric,
    tangent_basis,
    tangent_vector,
)
from .dynamics import Trajectory, evolve, hamiltonian_vector_field, lift_field, uniform_grid
from .connection import (
    HolonomyResult,
    discrete_holonomy,
    geometric_phase,
    horizontal_lift,
    locked_inertia,
    mechanical_connection,
    momentum_map,
)
from .qsl import (
    Metric,
    QslReport,
    average_energy,
    distance_bound_check,
    find_geodesic,
    geodesic_distance,
    is_parallel,
    metric_uncertainty_check,
    qsl_report,
    uncertainty,
)
from .errors import NoConvergence, NumericalError, OrbitGeomError, ValidationError

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
