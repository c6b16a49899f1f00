"""psforge: pseudospherical surfaces (K = -1) from sine-Gordon angle
fields, and back to Weierstrass-type potentials.

Pipeline: angle field -> extended frame -> Sym immersion -> geometry
checks, and frame -> Birkhoff factors -> normalized x/y potentials, with
numerical factorization of twisted matrix Laurent loops.
"""

from . import algebra, cli, frames, loops, potentials, sinegordon, surfaces
from .errors import (BigCellViolation, IncompatibleCorner, IOFailure,
                     NonconvergentCell, NonpositiveProfile, NotSkew,
                     NotUnitary, PsforgeError, SingularAngle, StepFailure,
                     TruncationTooSmall, ZeroSpectralParameter)
from .frames import (ExtendedFrame, MaurerCartanForm, check_conditions_K,
                     compatibility_residual, flatness_residual, gauge,
                     integrate_frame, lambda_forms, lax_matrices,
                     maurer_cartan, su2_frame)
from .loops import (LaurentLoop, SampledLoop, birkhoff_split, check_reality,
                    check_twist, loop_eval, loop_norm, multiply)
from .potentials import (boundary_forms, cross_check_split, eta_2x2,
                         eta_general, eta_x, eta_y, integrate_minus,
                         integrate_plus)
from .sinegordon import (AngleField, GridSpec, constant_angle, goursat_solve,
                         sg_residual, soliton_angle)
from .surfaces import (HarmonicityReport, Immersion, SurfaceGeometry,
                       associated_family, export_mesh, fundamental_forms,
                       gauss_map, harmonicity_check, principal_curvatures,
                       sym_immersion)

__version__ = "0.1.0"
