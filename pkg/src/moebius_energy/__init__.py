"""Moebius-invariant energies of knots, links and embedded 2-spheres.

Curves are handled as :class:`ClosedCurve` polylines scaled to length 2*pi;
spheres as :class:`SphereMesh` triangulations carrying a domain on the unit
sphere and an image in R^n.
"""

__version__ = "0.1.0"

from .errors import (
    ConformalityError,
    EnergyError,
    InvalidShapeError,
    ParameterError,
    PointAtInfinityError,
    PreconditionError,
    SamplingError,
    TopologyError,
    UndefinedResultError,
)
from .geom import (
    ClosedCurve,
    SphereMesh,
    SurfacePatch,
    angle_defects,
    conformal_factor,
    curve_curvature,
    curve_normalize,
    dual_areas,
    gauss_map,
    gaussian_curvature,
    mean_curvature_vector,
    second_form_norm,
)
from .moebius import Inversion, MoebiusMap, Orthogonal, Scaling, Translation, apply, apply_shape, random_safe
from .curve_energy import EnergyBreakdown, curve_e0, curve_e_lambda, link_energy_total, link_energy_u
from .surface_energy import (
    conformality_error,
    conformalize,
    regularizer,
    schwarz_check,
    surface_e0,
    surface_e_lambda,
    surface_link_u,
    willmore_term,
)
from .optimize import descend, fd_gradient
from .compactness import (
    CoverReport,
    annulus_modulus,
    ball_cover,
    disk_pair_integral,
    gauss_holder_quotient,
    kuiper_selfdistance,
    sheet_count,
)
from .shapes import annulus, make_curve, make_sphere_mesh
