"""Verification-driven agreement scoring and selection of ReLU networks."""

from .bounds import Box, NeuronBounds, interval_propagate, linear_relax
from .distance import (
    Condition,
    DistanceSpec,
    InputDomain,
    PdtResult,
    Status,
    encode_query,
    exists_distance_geq,
    pdt,
    pdt_multi_region,
    preset_domain,
)
from .arith import TrainConfig, ensemble_predict, gen_dataset, train, train_pool
from .attack import AttackConfig, Variant, attack_pdt, constrained_pgd, fgsm, pgd, sample_pdt
from .net import Layer, Network, concatenate, evaluate, load, save, toy_network
from .select import (
    Criterion,
    PdtTable,
    SelectionConfig,
    SelectionReport,
    cluster_pdt_analysis,
    disagreement_score,
    run_selection,
)
from .verify import (
    Budget,
    BudgetExhausted,
    OutputConstraint,
    Query,
    Verdict,
    VerifierUnknown,
    brute_force_decide,
    decide,
)

__version__ = "0.1.0"
