"""Numerical laboratory for the cutoff soft-potential Boltzmann equation.

Submodules: :mod:`kml.exponents` (exact exponent algebra),
:mod:`kml.kinematics`, :mod:`kml.discretization` (grids, fields, mixed
norms), :mod:`kml.collision`, :mod:`kml.transport`, :mod:`kml.solver`,
:mod:`kml.estimates` and :mod:`kml.cli`.

``KML_THREADS`` caps the BLAS/OpenMP worker count; it only takes effect if
set before numpy is first imported.
"""
import os as _os

__version__ = "0.1.0"

_threads = _os.environ.get("KML_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .exponents import Triplet, solvable_triplet, conjugate_triplet, is_kt_admissible  # noqa: E402
from .discretization import PhaseField, PhaseGrid, SpatialGrid, VelocityGrid, SphereQuadrature  # noqa: E402
from .kinematics import KernelSpec  # noqa: E402
from .collision import CollisionConfig, gain, loss_rate, collide  # noqa: E402
from .transport import TimeGrid, advect, duhamel, damped_propagate  # noqa: E402
from .solver import SolverConfig, kaniel_shinbrot, solve  # noqa: E402

__all__ = [
    "Triplet", "solvable_triplet", "conjugate_triplet", "is_kt_admissible",
    "PhaseField", "PhaseGrid", "SpatialGrid", "VelocityGrid", "SphereQuadrature",
    "KernelSpec", "CollisionConfig", "gain", "loss_rate", "collide",
    "TimeGrid", "advect", "duhamel", "damped_propagate",
    "SolverConfig", "kaniel_shinbrot", "solve",
]
