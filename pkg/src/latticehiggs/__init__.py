"""Compact abelian lattice Higgs model with charge-k matter.

Three mutually validating computational routes for charged Wilson line/loop
expectations and the Marcu-Fredenhagen ratio on finite boxes of Z^m:

* Markov-chain Monte Carlo sampling of the Gibbs measure (:mod:`.gibbs`),
* exact truncated current expansion with rigorous tails (:mod:`.currents`),
* direct tensor quadrature on tiny complexes (:mod:`.oracle`),

plus polymer-expansion weights with Hoelder smallness bounds (:mod:`.polymers`)
and the analytic confinement lower bound on the ratio.
"""

__version__ = "0.1.0"

from .dec import (
    Chain,
    Complex,
    DiffForm,
    OrientedCell,
    PathChain,
    adjacency_components,
    build_box,
    mf_geometry,
    rectangle_loop,
)
from .currents import (
    BoundReport,
    Current,
    InteractionSet,
    WeightedSum,
    charged_interactions,
    confinement_lower_bound,
    constraint_residual,
    enumerate_currents,
    expectation_via_currents,
    line_witness,
    partition_sum,
    surface_witness,
)
from .gibbs import (
    Estimate,
    LinkField,
    ModelParams,
    SamplerConfig,
    decay_fit,
    estimate_mf_ratio,
    estimate_wilson,
    ghs_product_bound,
    hamiltonian,
    metropolis_sweep,
)
from .oracle import OracleInstance, cross_validate, oracle_expectation, quadrature_partition
from .polymers import (
    BesselTable,
    PlaquettePolymer,
    TwistedPolymer,
    bessel_i,
    charge_moment,
    holder_bound_charge1,
    holder_bound_charged,
    plaquette_partition,
    polymer_weight_charge1,
    polymer_weight_charged,
    smallness_scan,
)

__all__ = [name for name in dir() if not name.startswith("_")]
