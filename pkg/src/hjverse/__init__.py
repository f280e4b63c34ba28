"""Wave propagation, Madelung fields, guided trajectories, caustics and branch statistics."""
from .born import (BranchDistribution, TwoStateWeights, branch_distribution, branch_probabilities,
                   enumerate_branches, moments_by_generating_function, simulate_branching)
from .grid import Boundary, Grid, Observables, Wavefunction, make_grid, observables
from .hj_classical import CausticReport, RayBundle, trace_classical, trace_scaled
from .madelung import (MadelungFields, continuity_residual, decompose, exchange_defect,
                       smoothing_potential, velocity_field)
from .tdse import (NumericalAbort, Potential, PropagatorConfig, Scheme, energy, propagate, step,
                   stencil_energy)
from .trajectories import TrajectoryEnsemble, advect, equivariance_check, ks_distance, sample_initial
from .uncertainty import (HJDecomposition, UncertaintyReport, delta_limit_study, hj_decomposition,
                          uncertainty_report, weyl_functional, weyl_minimize)

__version__ = "0.1.0"
