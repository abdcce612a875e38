from .grid import VelocityGrid, GridError, build_grid, maxwellian_mass, sqrt_maxwellian
from .collision import CollisionModel, ModelError, collision_frequency, mean_relative_speed
from .operator import (LinearOperator, MacroBasis, OperatorError, QuadratureError,
                       assemble_L, macro_basis, macro_project, gap_estimate,
                       sampled_gap, nu_bounds, null_defect, self_adjoint_defect,
                       kernel_weighted_norm, conservative_projection, raw_operator_rows)
from .gamma import gamma_eval, GammaError
from .cache import KernelCache, CacheCorrupt
