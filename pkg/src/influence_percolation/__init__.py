"""Softmax opinion dynamics on block-model graphs with generalized-modularity influence.

The subpackages cover graph generation and ingestion (:mod:`.graph`), the
influence weights and preference state (:mod:`.influence`), the stochastic
event-driven dynamics (:mod:`.dynamics`), the mean-field percolation theory
(:mod:`.meanfield`) and the sweep harness behind the command line
(:mod:`.sweep`, :mod:`.cli`).
"""

from .dynamics import (
    ScenarioConfig,
    SimulationResult,
    init_scenario,
    run_events,
    run_simulation,
    schedule_events,
    softmax_update,
    tally_votes,
)
from .errors import (
    ConsistencyError,
    DegenerateModelError,
    EstimationError,
    IngestionError,
    InfluencePercolationError,
    MutationError,
    ParameterError,
    PlacementError,
    UsageError,
    ValidationError,
)
from .graph import BlockModelParams, Graph, estimate_block_probs, generate_sbm, load_partitioned_edge_list
from .influence import InfluenceModel, PreferenceState, apply_preference_change, combined_influence, influence_weight
from .meanfield import (
    MeanFieldScenario,
    lambda_vector,
    meanfield_trajectory,
    meanfield_z,
    nonnegativity_condition,
    percolation_threshold,
)
from .sweep import Axis, SweepResult, SweepSpec, run_sweep

__version__ = "0.1.0"

__all__ = [
    "Axis", "BlockModelParams", "ConsistencyError", "DegenerateModelError", "EstimationError", "Graph",
    "IngestionError", "InfluenceModel", "InfluencePercolationError", "MeanFieldScenario", "MutationError",
    "ParameterError", "PlacementError", "PreferenceState", "ScenarioConfig", "SimulationResult", "SweepResult",
    "SweepSpec", "UsageError", "ValidationError", "apply_preference_change", "combined_influence",
    "estimate_block_probs", "generate_sbm", "influence_weight", "init_scenario", "lambda_vector",
    "load_partitioned_edge_list", "meanfield_trajectory", "meanfield_z", "nonnegativity_condition",
    "percolation_threshold", "run_events", "run_simulation", "run_sweep", "schedule_events", "softmax_update",
    "tally_votes",
]
