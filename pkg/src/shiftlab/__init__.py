"""shiftlab: a desk-scale laboratory for symbolic dynamics.

Pressure and equilibrium states on subshifts of finite type, Birkhoff
level-set spectra, suspension flows with Abramov entropy, a concrete
Lorenz-type Poincare family conjugate to the full 2-shift, exact and
Monte-Carlo large-deviation checks, and constructive entropy-dense
approximation by transitive sub-SFTs.
"""

__version__ = "0.1.0"

from .sft import (
    SftGraph,
    full_shift,
    golden_mean_shift,
    higher_block_recode,
    topological_entropy,
    validate_sft,
)
from .functions import LocallyConstantFunction, constant, from_dict, indicator
from .measures import (
    CylinderMarginals,
    MarkovMeasure,
    bernoulli_measure,
    cylinder_marginals,
    dstar_distance,
    integrate,
    markov_entropy,
    markov_measure,
    parry_measure,
    sample_orbit,
)
from .thermo import (
    EquilibriumState,
    SpectrumCurve,
    constrained_entropy_oracle,
    equilibrium_state,
    gibbs_constant_audit,
    legendre_spectrum,
    pressure,
    rate_functional,
)
from .suspension import (
    SuspensionSystem,
    abramov_entropy,
    cylinder_counting_entropy,
    flow_integral,
    flow_level_spectrum,
    flow_topological_entropy,
    irregular_point,
    separated_set_entropy,
)
from .lorenz import (
    LorenzModel,
    inverse_branch,
    itinerary,
    poincare_step,
    reference_model,
    validate_model,
)
from .ldp import (
    BallConstraint,
    DeviationReport,
    c_infinity_estimate,
    exact_cgf,
    exact_deviation_prob,
    level1_rate,
    level2_ball_rate,
    level2_mc_test,
    mc_deviation_prob,
    weak_gibbs_audit,
)
from .approx import (
    SubSft,
    entropy_dense_approx,
    markovization,
    nested_horseshoe_sequence,
    sub_sft,
    sub_sft_join,
)
