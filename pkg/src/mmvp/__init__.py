"""Recovery of sparse Poisson rate vectors from grouped compressed measurements."""

from .model import (
    GeneratedInstance,
    GenerationConfig,
    MeasurementBatch,
    PoissonRates,
    SensingEnsemble,
    SignalMatrix,
    assign_groups,
    generate_instance,
    measure,
    sample_poisson_counts,
    sample_rates,
    sample_sensing_ensemble,
    sample_signals,
)
from .likelihood import (
    LatticeBound,
    exact_log_likelihood_small,
    log_density_y_given_x,
    mc_log_likelihood,
    mixture_density_curve,
    poisson_log_pmf,
)
from .solver import SporeConfig, SporeResult, run_spore

__version__ = "0.1.0"
