"""Synchronous round-based orchestration of master and workers.

One round of any scheme: sample a batch, assign points to workers, collect
gradient copies (Byzantine workers may tamper), optionally detect/identify
faults, apply the SGD update, and account for every gradient computed.

RNG architecture: a single master seed fans out into independent named
streams keyed by (trial, iteration, role, ...). Sampling, assignment, the
fault-check coin and each worker's tampering draws all live on separate
streams, so adding or removing an adversary cannot perturb the data path.
That independence is what makes the with/without-adversary trajectory
comparison meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import adversary as adv
from .adversary import AdversaryConfig, TamperStream
from .codes import Symbol, detect, identify, reactive_assign, replicate_assign
from .model import Parameter, average_gradient, generate_dataset, gradient_fn, loss_fn, sgd_step
from .policy import PolicyState, lambda_from_loss, q_for_delta, q_star, trimmed_mean

# Named stream roles. Worker ids / point keys are appended after the role.
ROLE_DATASET = 0
ROLE_SAMPLE = 1
ROLE_ASSIGN = 2
ROLE_COIN = 3
ROLE_ADVERSARY = 4
ROLE_CHECK = 5
ROLE_REACTIVE = 6

# Per-iteration stream key for a worker's loss report lie; outside any
# plausible data-point index.
LOSS_REPORT_KEY = 1 << 40


class InvariantViolation(Exception):
    """An impossible protocol state, e.g. an honest worker identified as
    Byzantine. Signals a bug, not a bad configuration."""


class Streams:
    """Derives independent named generators from one master seed."""

    def __init__(self, master_seed: int):
        self.master = int(master_seed)

    def rng(self, *key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence((self.master, *key)))

    def seed(self, *key: int) -> int:
        return int(
            np.random.SeedSequence((self.master, *key)).generate_state(1, np.uint64)[0]
        )


@dataclass
class RunState:
    """Everything one trial mutates while stepping through rounds."""

    trial: int
    parameter: Parameter
    active: tuple[int, ...]
    eliminated: frozenset[int]
    policy: PolicyState
    adversary: AdversaryConfig
    streams: Streams
    eta0: float = 0.1
    gamma: float = 0.01
    eliminate: bool = True
    tamper_log: list = field(default_factory=list)

    def eta(self) -> float:
        return self.eta0 / (1.0 + self.gamma * self.parameter.iteration)


@dataclass(frozen=True)
class RoundRecord:
    """Everything observable about one iteration."""

    trial: int
    iteration: int
    scheme: str
    sampled: tuple[int, ...]
    fault_check: bool
    suspects: int
    identified: frozenset[int]
    identified_cum: int
    gradients_computed: int
    gradients_used: int
    update_faulty: bool
    loss: float
    dist_to_opt: float
    q_t: float
    lambda_t: float

    @property
    def efficiency(self) -> float:
        return self.gradients_used / self.gradients_computed


@dataclass
class TrialResult:
    records: list[RoundRecord]
    trajectory: list[np.ndarray]  # parameter values w_0 .. w_T
    state: RunState


def build_dataset(config):
    return generate_dataset(
        config.task, config.N, config.d, Streams(config.seed).seed(ROLE_DATASET)
    )


def initial_state(config, dataset, trial: int = 0) -> RunState:
    d = dataset.dim
    if config.w0_offset is not None:
        w0 = dataset.optimum + (config.w0_offset / math.sqrt(d)) * np.ones(d)
    else:
        w0 = np.zeros(d)
    q = 0.0
    if config.scheme == "randomized":
        q = config.q if config.q is not None else q_for_delta(config.delta, config.f)
    policy = PolicyState(
        scheme=config.scheme,
        fault_budget=config.f,
        q=q,
        assumed_p=config.adaptive_p if config.adaptive_p is not None else 0.0,
        loss_source=config.loss_source,
        trim=config.trim,
    )
    return RunState(
        trial=trial,
        parameter=Parameter(value=w0, iteration=0),
        active=tuple(range(config.n)),
        eliminated=frozenset(),
        policy=policy,
        adversary=config.adversary_config(),
        streams=Streams(config.seed),
        eta0=config.eta0,
        gamma=config.gamma,
        eliminate=config.eliminate,
    )


def _sample_and_compute(state: RunState, dataset, m: int):
    """Draw this round's batch and compute honest gradients and batch loss."""
    if m > dataset.size:
        raise ValueError(f"batch size {m} exceeds dataset size {dataset.size}")
    if not state.active:
        raise ValueError("no active workers remain")
    t = state.parameter.iteration
    w = state.parameter.value
    X, y = dataset.features(), dataset.labels()
    idx = state.streams.rng(state.trial, t, ROLE_SAMPLE).choice(
        dataset.size, size=m, replace=False
    )
    sampled = tuple(int(i) for i in idx)
    gfn = gradient_fn(dataset.task)
    lfn = loss_fn(dataset.task)
    honest = [gfn(w, X[i], y[i]) for i in sampled]
    total = 0.0
    for i in sampled:
        total += lfn(w, X[i], y[i])
    return sampled, honest, total / m


def _collect(state: RunState, t: int, honest, pairs, copies, adv_streams) -> None:
    """Ask workers for the (point, worker) pairs in ``pairs`` and merge the
    delivered copies. Byzantine workers are routed through the adversary."""
    by_worker: dict[int, list[int]] = {}
    for point in sorted(pairs):
        for w in pairs[point]:
            by_worker.setdefault(w, []).append(point)
    byzantine = state.adversary.byzantine
    for w in sorted(by_worker):
        payload = Symbol(
            worker=w, payload=tuple((p, honest[p]) for p in by_worker[w])
        )
        if w in byzantine:
            if w not in adv_streams:
                adv_streams[w] = TamperStream(
                    state.streams.rng(state.trial, t, ROLE_ADVERSARY, w)
                )
            payload, record = adv.act(w, payload, t, state.adversary, adv_streams[w])
            if record is not None:
                state.tamper_log.append(record)
        for p, g in payload.payload:
            copies.setdefault(p, {})[w] = g


def _eliminate(state: RunState, identified: frozenset[int]) -> None:
    if not identified:
        return
    stray = identified - state.adversary.byzantine
    if stray:
        raise InvariantViolation(
            f"honest worker(s) {sorted(stray)} identified as Byzantine"
        )
    if not state.eliminate:
        return
    state.eliminated = state.eliminated | identified
    state.active = tuple(w for w in state.active if w not in identified)
    state.policy.identified = len(state.eliminated)


def _finish_round(
    state: RunState,
    dataset,
    *,
    scheme: str,
    sampled,
    used,
    honest,
    loss: float,
    checked: bool,
    suspects,
    identified: frozenset[int],
    computed: int,
    q_t: float,
    lam_t: float,
) -> RoundRecord:
    m = len(sampled)
    faulty = any(
        u is not honest[p] and not np.array_equal(u, honest[p])
        for p, u in enumerate(used)
    )
    g = average_gradient(used)
    state.parameter = sgd_step(state.parameter, g, state.eta())
    _eliminate(state, identified)
    if m > computed:
        raise InvariantViolation("more gradients used than computed")
    return RoundRecord(
        trial=state.trial,
        iteration=state.parameter.iteration - 1,
        scheme=scheme,
        sampled=sampled,
        fault_check=checked,
        suspects=len(suspects),
        identified=identified,
        identified_cum=len(state.eliminated),
        gradients_computed=computed,
        gradients_used=m,
        update_faulty=faulty,
        loss=loss,
        dist_to_opt=float(np.linalg.norm(state.parameter.value - dataset.optimum)),
        q_t=q_t,
        lambda_t=lam_t,
    )


def run_iteration_deterministic(state: RunState, dataset, m: int):
    """Full-redundancy round: every point replicated to f_t + 1 workers,
    mismatches resolved by reactive redundancy and majority voting. The
    applied update always uses the correct gradients."""
    pol = state.policy
    f_t = pol.residual_faults
    if len(state.active) < 2 * f_t + 1:
        raise ValueError(
            f"insufficient workers: need {2 * f_t + 1} active, have {len(state.active)}"
        )
    t = state.parameter.iteration
    sampled, honest, loss = _sample_and_compute(state, dataset, m)
    degree = f_t + 1
    assignment = replicate_assign(
        m, state.active, degree, state.streams.seed(state.trial, t, ROLE_ASSIGN)
    )
    copies: dict[int, dict[int, np.ndarray]] = {}
    adv_streams: dict[int, TamperStream] = {}
    _collect(state, t, honest, assignment.assignees, copies, adv_streams)
    computed = m * degree
    suspects: frozenset[int] = frozenset()
    identified: frozenset[int] = frozenset()
    resolved: dict[int, np.ndarray] = {}
    if degree >= 2:
        suspects = detect(copies).suspects
        if suspects:
            expanded = reactive_assign(
                suspects,
                assignment,
                f_t,
                state.active,
                state.streams.seed(state.trial, t, ROLE_REACTIVE),
            )
            extra = {p: expanded.assignees[p][degree:] for p in suspects}
            _collect(state, t, honest, extra, copies, adv_streams)
            computed += len(suspects) * f_t
            ids: set[int] = set()
            for p in sorted(suspects):
                value, who = identify(copies[p], f_t)
                resolved[p] = value
                ids |= who
            identified = frozenset(ids)
    used = [
        resolved[p] if p in resolved else copies[p][assignment.assignees[p][0]]
        for p in range(m)
    ]
    record = _finish_round(
        state,
        dataset,
        scheme="deterministic",
        sampled=sampled,
        used=used,
        honest=honest,
        loss=loss,
        checked=True,
        suspects=suspects,
        identified=identified,
        computed=computed,
        q_t=1.0,
        lam_t=0.0,
    )
    return state, record


def _randomized_core(
    state: RunState, dataset, m: int, *, q_t: float, lam_t: float, scheme: str, presampled=None
):
    """Default round plus a probabilistic fault-check phase.

    The check replicates every point to f_t extra workers (the default-phase
    copies are reused), resolves any mismatch via reactive redundancy and
    majority voting, and always applies the corrected update.
    """
    pol = state.policy
    f_t = pol.residual_faults
    if scheme != "traditional" and len(state.active) < 2 * f_t + 1:
        raise ValueError(
            f"insufficient workers: need {2 * f_t + 1} active, have {len(state.active)}"
        )
    t = state.parameter.iteration
    sampled, honest, loss = (
        presampled if presampled is not None else _sample_and_compute(state, dataset, m)
    )
    assignment = replicate_assign(
        m, state.active, 1, state.streams.seed(state.trial, t, ROLE_ASSIGN)
    )
    copies: dict[int, dict[int, np.ndarray]] = {}
    adv_streams: dict[int, TamperStream] = {}
    _collect(state, t, honest, assignment.assignees, copies, adv_streams)
    computed = m
    checked = (
        q_t > 0.0
        and state.streams.rng(state.trial, t, ROLE_COIN).random() < q_t
    )
    suspects: frozenset[int] = frozenset()
    identified: frozenset[int] = frozenset()
    resolved: dict[int, np.ndarray] = {}
    if checked and f_t >= 1:
        expanded = reactive_assign(
            range(m),
            assignment,
            f_t,
            state.active,
            state.streams.seed(state.trial, t, ROLE_CHECK),
        )
        _collect(
            state,
            t,
            honest,
            {p: expanded.assignees[p][1:] for p in range(m)},
            copies,
            adv_streams,
        )
        computed += m * f_t
        suspects = detect(copies).suspects
        if suspects:
            final = reactive_assign(
                suspects,
                expanded,
                f_t,
                state.active,
                state.streams.seed(state.trial, t, ROLE_REACTIVE),
            )
            _collect(
                state,
                t,
                honest,
                {p: final.assignees[p][1 + f_t :] for p in suspects},
                copies,
                adv_streams,
            )
            computed += len(suspects) * f_t
            ids: set[int] = set()
            for p in sorted(suspects):
                value, who = identify(copies[p], f_t)
                resolved[p] = value
                ids |= who
            identified = frozenset(ids)
    used = [
        resolved[p] if p in resolved else copies[p][assignment.assignees[p][0]]
        for p in range(m)
    ]
    record = _finish_round(
        state,
        dataset,
        scheme=scheme,
        sampled=sampled,
        used=used,
        honest=honest,
        loss=loss,
        checked=checked,
        suspects=suspects,
        identified=identified,
        computed=computed,
        q_t=q_t,
        lam_t=lam_t,
    )
    return state, record


def run_iteration_traditional(state: RunState, dataset, m: int):
    """Plain parallelized SGD: no redundancy, no checks, efficiency 1."""
    return _randomized_core(
        state, dataset, m, q_t=0.0, lam_t=0.0, scheme="traditional"
    )


def run_iteration_randomized(state: RunState, dataset, m: int):
    """Default rounds with an intermittent fault-check at probability q."""
    return _randomized_core(
        state,
        dataset,
        m,
        q_t=state.policy.q,
        lam_t=state.policy.loss_weight,
        scheme="randomized",
    )


def _worker_loss_reports(state: RunState, dataset, sampled, assignment, t: int):
    """Per-worker average loss over its assigned points, with Byzantine
    workers lying under the same iteration coin as their gradients."""
    lfn = loss_fn(dataset.task)
    w = state.parameter.value
    X, y = dataset.features(), dataset.labels()
    points_of: dict[int, list[int]] = {}
    for p, workers in assignment.assignees.items():
        for wk in workers:
            points_of.setdefault(wk, []).append(p)
    reports = []
    for wk in sorted(points_of):
        pts = sorted(points_of[wk])
        total = 0.0
        for p in pts:
            total += lfn(w, X[sampled[p]], y[sampled[p]])
        report = total / len(pts)
        if wk in state.adversary.byzantine:
            stream = TamperStream(state.streams.rng(state.trial, t, ROLE_ADVERSARY, wk))
            if stream.tampers(state.adversary.p_for(wk)):
                cfg = state.adversary
                rng = (
                    stream.fresh_rng()
                    if cfg.strategy == "inconsistent_copies"
                    else stream.point_rng(LOSS_REPORT_KEY)
                )
                const = (cfg.constant[0],) if cfg.constant else None
                report = float(
                    adv.tamper_value(
                        np.array([report]),
                        cfg.strategy,
                        rng,
                        sigma=cfg.noise_sigma,
                        constant=const,
                    )[0]
                )
        reports.append(report)
    return reports


def run_iteration_adaptive(state: RunState, dataset, m: int):
    """Randomized round with q chosen per-iteration from the observed loss."""
    pol = state.policy
    f_t = pol.residual_faults
    t = state.parameter.iteration
    sampled, honest, exact_loss = _sample_and_compute(state, dataset, m)
    if pol.loss_source == "trimmed":
        assignment = replicate_assign(
            m, state.active, 1, state.streams.seed(state.trial, t, ROLE_ASSIGN)
        )
        reports = _worker_loss_reports(state, dataset, sampled, assignment, t)
        trim = pol.trim if pol.trim is not None else f_t
        observed = trimmed_mean(reports, trim)
        observed = max(observed, 0.0)
    else:
        observed = exact_loss
    lam = lambda_from_loss(observed)
    q_t = q_star(lam, pol.assumed_p, f_t)
    pol.loss_weight = lam
    pol.q = q_t
    return _randomized_core(
        state,
        dataset,
        m,
        q_t=q_t,
        lam_t=lam,
        scheme="adaptive",
        presampled=(sampled, honest, observed),
    )


_SCHEME_FNS = {
    "traditional": run_iteration_traditional,
    "deterministic": run_iteration_deterministic,
    "randomized": run_iteration_randomized,
    "adaptive": run_iteration_adaptive,
}


def run_trial(config, dataset, trial: int) -> TrialResult:
    """Run T iterations of the configured scheme for one seeded trial."""
    state = initial_state(config, dataset, trial)
    step = _SCHEME_FNS[config.scheme]
    records: list[RoundRecord] = []
    trajectory = [state.parameter.value]
    for _ in range(config.T):
        state, record = step(state, dataset, config.m)
        records.append(record)
        trajectory.append(state.parameter.value)
    return TrialResult(records=records, trajectory=trajectory, state=state)


def run_experiment(config) -> list[TrialResult]:
    """All trials of an experiment; fully deterministic in the master seed,
    and trials are independent (any execution order gives the same records)."""
    dataset = build_dataset(config)
    return [run_trial(config, dataset, trial) for trial in range(config.trials)]
