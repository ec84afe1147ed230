"""Purity, reduced purities and distilled purities of fermionic many-body states."""

from .density import (
    DeterminantBasis,
    InvariantError,
    ManyBodyDensityMatrix,
    ensemble_average,
    from_pure,
    purity,
    rotate_density,
)
from .fock import (
    SlaterDeterminant,
    TransitionDescriptor,
    apply_ladder,
    coherence_order,
    enumerate_determinants,
    enumerate_sz_sector,
    occupation_vector,
    transition_descriptor,
)
from .purity import (
    PurityReport,
    distilled_bounds,
    distilled_p1,
    distilled_p1_closed,
    distilled_p2,
    distilled_p2_closed,
    p1_closed,
    p2_closed,
    purity_report,
    reduced_purity_1,
    reduced_purity_2,
)
from .rdm import (
    OneBodyRDM,
    TwoBodyRDM,
    one_rdm_closed,
    one_rdm_oracle,
    rotate,
    two_rdm_closed,
    two_rdm_oracle,
)

__version__ = "0.1.0"
