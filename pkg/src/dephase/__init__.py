"""dephase: phase-averaged evolution of closed, weakly interacting quantum systems.

The library covers four layers:

* :mod:`dephase.spectral_core`: amplitude/probability vectors, the
  unitary-to-bistochastic conversion, and a Monte Carlo phase-averaging oracle;
* :mod:`dephase.master_evolution`: energy-shell rate matrices, master-equation
  integrators, and the phase-scrambling protocol that bridges unitary and
  stochastic dynamics;
* :mod:`dephase.occupation_kinetics`: occupation-number state spaces,
  many-body rate matrices, and collision-integral rate equations for mean
  occupations;
* :mod:`dephase.timescale_tools`: the finite-window smoothing kernel and
  applicability-window estimates.

:mod:`dephase.experiments` adds a config-driven runner and the ``dephase``
command-line tool.
"""

from .errors import NumericalError, ValidationError
from .spectral_core import (
    AmplitudeVector,
    PhaseAverageResult,
    ProbabilityVector,
    TransitionMatrix,
    UnitaryMatrix,
    apply_noncoherent,
    hadamard_square,
    phase_average_mc,
    random_hermitian,
    random_unitary,
    shannon_entropy,
)
from .master_evolution import (
    DensityOfStates,
    RateMatrix,
    ScrambleTrajectory,
    StationaryReport,
    SystemSpec,
    build_q_matrix,
    evolve_master,
    evolve_unitary_reference,
    fermi_rate,
    master_trajectory,
    phase_scramble_evolution,
    random_degenerate_system,
    stationary_analysis,
)
from .occupation_kinetics import (
    CommutativityReport,
    ConsistencyReport,
    FockBasis,
    KineticAssembly,
    MeanOccupations,
    ModeSpec,
    ProcessSpec,
    bose_einstein,
    boltzmann_rhs_fermion_boson,
    boltzmann_rhs_three_phonon,
    build_kinetic_q,
    collision_fixed_point,
    collision_rhs,
    diagram_commutativity,
    fermi_dirac,
    geometric_marginal,
    mean_occupation,
    mean_occupations,
    product_state,
    thermal_marginal,
    verify_derivative_consistency,
)
from .timescale_tools import (
    TimescaleReport,
    WindowParams,
    applicability_window,
    chi,
    chi_bar,
    chi_bar_squared_integral,
    chi_squared_integral,
)

__version__ = "0.1.0"
