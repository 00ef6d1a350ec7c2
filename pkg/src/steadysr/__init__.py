"""Steady-state superradiance of repumped atoms with collective cavity decay.

Simulates N two-level atoms whose excited state decays collectively through
a fast-decaying cavity mode (rate gamma_c per atom pair amplitude) while
each atom is incoherently repumped at rate w. Solvers: Monte Carlo
wavefunction trajectories (mcwf), an exact Liouvillian steady state for
small N (liouville), and the truncated pair-correlation theory with its
large-N closed forms (cumulant).
"""

from .analysis import (EmissionReport, SubspaceTable, TransitionDiagram,
                       emission_report, subspace_populations,
                       transition_diagram)
from .cumulant import (CoherenceTime, CumulantState, MaxIntensity,
                       RescaledState, coherence_time, cumulant_rhs,
                       emission_rate, integrate_cumulant, max_intensity,
                       rescaled_steady_state, steady_state_cubic)
from .errors import (CapabilityError, DegenerateSteadyStateError,
                     NumericalError, SteadySRError, ValidationError)
from .hilbert import (JMSubspace, build_collective, build_single_atom,
                      jm_decomposition, multiplicity, projector)
from .liouville import (Liouvillian, build_liouvillian,
                        regression_correlation, steady_state_dm,
                        steady_state_observables)
from .mcwf import (JumpChannel, SteadyStateEstimate, TrajectoryRecord,
                   effective_hamiltonian, evolve_trajectory, jump_channels,
                   run_ensemble, steady_state)
from .model import (CavityGeometry, Config, CQEDParams, ModelParams,
                    derive_cqed, geometric_critical_numbers, load_config,
                    parse_config, validate)

__version__ = "0.1.0"
