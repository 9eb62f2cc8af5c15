"""Seeded simulator of Byzantine fault-tolerant parallelized SGD.

Implements plain parallelized SGD plus three fault-tolerant variants built
on gradient replication: a deterministic scheme with reactive redundancy, a
randomized scheme with intermittent fault-checks, and an adaptive scheme
that tunes the check probability from the observed loss.
"""

from .adversary import AdversaryConfig, TamperRecord, tamper_value
from .codes import (
    Assignment,
    DetectionReport,
    Symbol,
    detect,
    identify,
    linear_check,
    linear_encode,
    reactive_assign,
    replicate_assign,
)
from .engine import (
    InvariantViolation,
    RoundRecord,
    RunState,
    Streams,
    TrialResult,
    build_dataset,
    initial_state,
    run_experiment,
    run_iteration_adaptive,
    run_iteration_deterministic,
    run_iteration_randomized,
    run_iteration_traditional,
    run_trial,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    MetricsSummary,
    emit_csv,
    load_csv,
    parse_config,
    summarize,
)
from .model import (
    DataPoint,
    Dataset,
    Parameter,
    average_gradient,
    generate_dataset,
    gradient,
    observed_loss,
    sgd_step,
)
from .policy import (
    PolicyState,
    efficiency_lower_bound,
    lambda_from_loss,
    objective,
    prob_faulty_update,
    prob_unidentified,
    q_for_delta,
    q_star,
    trimmed_mean,
)

__version__ = "0.1.0"
