"""Symbolic regression engine: CGP expressions, Newton-learned constants,
and a loss/complexity Pareto front."""

from .data import (
    ColumnSpec,
    DataError,
    Dataset,
    LinearModel,
    MetricReport,
    NumericalError,
    ScalingState,
    apply_scaling,
    fit_linear,
    fit_scaling,
    load_csv,
    metrics,
    split_dataset,
    synthetic_dataset,
    write_csv,
)
from .duals import D2Scalar, KernelSet, apply_kernel, d2_constant, d2_seed
from .estimator import SymbolicRegressor
from .evolution import (
    EvolutionConfig,
    Individual,
    MultiStartResult,
    ParetoFront,
    RunResult,
    crowding_truncate,
    evolve_generation,
    initialize_population,
    multi_start,
    non_dominated_sort,
    run,
)
from .genotype import (
    CgpParams,
    Genotype,
    active_nodes,
    complexity,
    decode_infix,
    evaluate,
    evaluate_dual,
    genotype_from_dict,
    genotype_to_dict,
    mutate,
    random_genotype,
    validate_genotype,
)
from .loss import LossReport, loss_with_derivatives, mse_loss, newton_step, predictions

__version__ = "0.1.0"

__all__ = [
    "CgpParams",
    "ColumnSpec",
    "D2Scalar",
    "DataError",
    "Dataset",
    "EvolutionConfig",
    "Genotype",
    "Individual",
    "KernelSet",
    "LinearModel",
    "LossReport",
    "MetricReport",
    "MultiStartResult",
    "NumericalError",
    "ParetoFront",
    "RunResult",
    "ScalingState",
    "SymbolicRegressor",
    "active_nodes",
    "apply_kernel",
    "apply_scaling",
    "complexity",
    "crowding_truncate",
    "d2_constant",
    "d2_seed",
    "decode_infix",
    "evaluate",
    "evaluate_dual",
    "evolve_generation",
    "fit_linear",
    "fit_scaling",
    "genotype_from_dict",
    "genotype_to_dict",
    "initialize_population",
    "load_csv",
    "loss_with_derivatives",
    "metrics",
    "mse_loss",
    "multi_start",
    "mutate",
    "newton_step",
    "non_dominated_sort",
    "predictions",
    "random_genotype",
    "run",
    "split_dataset",
    "synthetic_dataset",
    "write_csv",
    "validate_genotype",
]
