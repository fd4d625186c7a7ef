"""P1 finite elements and backward Euler for degenerate parabolic problems.

The eddy-current instantiation solves sigma du/dt - div((1/mu) grad u) = J_d
on the unit square, with sigma vanishing outside a conductor rectangle.
"""

from .analysis import (ErrorReport, ExactSolution, error_E_relative, error_H_relative,
                       error_max_sigma, fit_slope, mu_field_norm_sq, reconstruct_E,
                       reconstruct_H, sigma_norm_sq)
from .assembly import (Coefficients, DofMap, assemble_load, assemble_mass_conductor,
                       assemble_stiffness, h1_projection, interpolate, local_mass,
                       local_stiffness)
from .mesh import (MeshError, MeshFormatError, Region, TriMesh, generate_unit_square, load_mesh,
                   mesh_size, refine_uniform, save_mesh)
from .sparsela import CsrMatrix, NonConvergence, NonFiniteValue, solve_spd, spmv
from .stepper import (DegenerateSystem, EllipticityViolation, Trajectory, check_garding, run,
                      step)
from .study import (StudyConfig, eddy_current_system, manufactured_solution,
                    manufactured_source, run_convergence)

__version__ = "0.1.0"
