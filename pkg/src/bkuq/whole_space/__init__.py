from .radial import RadialGrid, AliasingError, radial_grid, plancherel_l2, inversion_matrix
from .propagate import (InitialData, FourierTrajectory, PropagationError, evolve,
                        macro_data, micro_data, default_times, propagate_expm)
from .norms import PhysicalNorms, physical_norms, x_space_l2
from .decay import DecayFit, FitError, decay_fit
from .checks import (fd_sensitivity_check, commuting_identity_defect, moment_drift,
                     energy_increments, small_radial_grid)
