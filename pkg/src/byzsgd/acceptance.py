"""Acceptance suite: one check per analytical claim the simulator must
reproduce, each runnable on a laptop in under a minute.

Every Monte-Carlo check runs from the fixed seeds in the checked-in config
files (``byzsgd/configs/``), so the whole suite is deterministic. The checks
driven by the simulation engine load those configs; the remaining checks
(closed forms, the linear code, gradient hygiene) are pure function-level
verifications.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .codes import linear_check, linear_encode, replicate_assign
from .engine import (
    ROLE_ASSIGN,
    Streams,
    build_dataset,
    initial_state,
    run_experiment,
    run_iteration_randomized,
    run_trial,
)
from .harness import emit_csv, parse_config
from .model import DataPoint, Parameter, generate_dataset, gradient, point_loss
from .policy import q_for_delta, q_star


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str


def load_config(name: str):
    """Parse one of the checked-in acceptance experiment configs."""
    path = resources.files("byzsgd").joinpath(f"configs/{name}")
    with resources.as_file(path) as concrete:
        return parse_config(concrete)


def _result(number, name, checks, detail) -> CriterionResult:
    return CriterionResult(number=number, name=name, passed=all(checks), detail=detail)


def criterion_1_exact_fault_tolerance() -> CriterionResult:
    cfg = load_config("c1_exact_tolerance.cfg")
    dataset = build_dataset(cfg)
    attacked = run_trial(cfg, dataset, 0)
    twin = load_config("c1_exact_tolerance.cfg")
    twin.p = 0.0  # identical run, adversary never lies
    fault_free = run_trial(twin, build_dataset(twin), 0)
    identical = all(
        a.tobytes() == b.tobytes()
        for a, b in zip(attacked.trajectory, fault_free.trajectory)
    )
    final = attacked.records[-1].dist_to_opt
    return _result(
        1,
        "exact fault tolerance",
        [identical, final <= 1e-3, len(attacked.trajectory) == cfg.T + 1],
        f"trajectories bit-identical over {cfg.T} rounds: {identical}; "
        f"final ||w - w*|| = {final:.3e} (<= 1e-3)",
    )


def criterion_2_no_fault_efficiency() -> CriterionResult:
    cfg = load_config("c2_no_fault_efficiency.cfg")
    records = run_experiment(cfg)[0].records
    target = 1.0 / (cfg.f + 1)
    exact = all(
        r.gradients_computed == cfg.m * (cfg.f + 1)
        and r.gradients_used == cfg.m
        and r.efficiency == target
        for r in records
    )
    return _result(
        2,
        "deterministic efficiency without faults",
        [exact],
        f"efficiency = 1/(f+1) = {target:.6f} in every one of {len(records)} iterations: {exact}",
    )


def criterion_3_worst_case_efficiency() -> CriterionResult:
    cfg = load_config("c3_worst_case.cfg")
    # the frozen Byzantine worker must really hold the constructed point
    assignment = replicate_assign(
        cfg.m, range(cfg.n), cfg.f + 1, Streams(cfg.seed).seed(0, 0, ROLE_ASSIGN)
    )
    construction_ok = cfg.byzantine_ids()[0] in assignment.assignees[0]
    result = run_trial(cfg, build_dataset(cfg), 0)
    first = result.records[0]
    worst = 1.0 / (2 * cfg.f + 1)
    first_ok = (
        first.suspects == cfg.m
        and first.gradients_computed == cfg.m * (2 * cfg.f + 1)
        and first.efficiency == worst
    )
    reactive_rounds = sum(1 for r in result.records if r.suspects > 0)
    mean_eff = sum(r.efficiency for r in result.records) / len(result.records)
    floor = 1.0 / (cfg.f + 1) - 0.01
    return _result(
        3,
        "deterministic worst-case efficiency",
        [construction_ok, first_ok, reactive_rounds <= cfg.f, mean_eff >= floor],
        f"constructed round efficiency = {first.efficiency:.6f} (= 1/(2f+1) = {worst:.6f}); "
        f"{reactive_rounds} of {cfg.T} rounds triggered reactive redundancy (<= f = {cfg.f}); "
        f"average efficiency {mean_eff:.4f} >= {floor:.4f}",
    )


def criterion_4_efficiency_bound() -> CriterionResult:
    cfg = load_config("c4_efficiency_bound.cfg")
    q_exact = q_for_delta(0.1, 2) == 0.125
    records = [r for trial in run_experiment(cfg) for r in trial.records]
    mean_eff = sum(r.efficiency for r in records) / len(records)
    return _result(
        4,
        "randomized expected-efficiency bound",
        [q_exact, 0.9 <= mean_eff <= 1.0, len(records) == 100_000],
        f"q_for_delta(0.1, 2) = 0.125 exactly: {q_exact}; "
        f"mean per-round efficiency {mean_eff:.5f} over {len(records)} rounds in [0.9, 1.0]",
    )


def criterion_5_faulty_update_probability() -> CriterionResult:
    cases = (
        ("c5_faulty_rate_q000.cfg", 0.5),
        ("c5_faulty_rate_q025.cfg", 0.375),
        ("c5_faulty_rate_q100.cfg", 0.0),
    )
    details = []
    checks = []
    for name, expected in cases:
        cfg = load_config(name)
        records = run_experiment(cfg)[0].records
        rate = sum(r.update_faulty for r in records) / len(records)
        checks.append(abs(rate - expected) <= 0.005)
        details.append(f"q={cfg.q}: {rate:.5f} vs {expected} (|err| {abs(rate - expected):.5f})")
    return _result(
        5,
        "faulty-update probability",
        checks,
        "; ".join(details) + " (tolerance 0.005)",
    )


def criterion_6_identification_bound() -> CriterionResult:
    cfg = load_config("c6_identification.cfg")
    dataset = build_dataset(cfg)
    rounds_to_identify = np.empty(cfg.trials)
    for trial in range(cfg.trials):
        state = initial_state(cfg, dataset, trial)
        caught = cfg.T + 1
        for _ in range(cfg.T):
            state, record = run_iteration_randomized(state, dataset, cfg.m)
            if record.identified_cum == cfg.f:
                caught = record.iteration + 1  # rounds run until identified
                break
        rounds_to_identify[trial] = caught
    q, p = cfg.q, cfg.p
    violations = 0
    for t in range(1, 61):
        fraction = float((rounds_to_identify > t).mean())
        bound = (1.0 - q * p) ** t
        margin = 3.0 * math.sqrt(bound * (1.0 - bound) / cfg.trials)
        if fraction > bound + margin:
            violations += 1
    mean_round = float(rounds_to_identify.mean())
    target = 1.0 / (q * p)
    mean_ok = abs(mean_round - target) <= 0.1 * target
    return _result(
        6,
        "identification-time bound",
        [violations == 0, mean_ok],
        f"unidentified fraction within (1-qp)^t + 3 sigma at every t in 1..60 "
        f"({violations} violations); mean identification round {mean_round:.3f} "
        f"within 10% of {target:.0f}",
    )


def criterion_7_q_star_closed_form() -> CriterionResult:
    grid_q = np.linspace(0.0, 1.0, 1_000_001)  # 1e-6 step
    worst = 0.0
    boundary_ok = True
    for f_t in range(6):
        for lam in (0.1 * i for i in range(11)):
            for p in (0.1 * i for i in range(11)):
                a = 2.0 * f_t / (2.0 * f_t + 1.0)
                b = 1.0 - (1.0 - p) ** f_t
                values = (1 - lam) * (a * grid_q) ** 2 + lam * (b * (1 - grid_q)) ** 2
                brute = float(grid_q[int(np.argmin(values))])
                closed = q_star(lam, p, f_t)
                worst = max(worst, abs(closed - brute))
    for f_t in range(6):
        for lam in (0.1 * i for i in range(11)):
            if q_star(lam, 0.0, f_t) != 0.0:
                boundary_ok = False
    for p in (0.1 * i for i in range(1, 11)):
        if q_star(1.0, p, 2) != 1.0:
            boundary_ok = False
        if q_star(0.5, p, 0) != 0.0:
            boundary_ok = False
    return _result(
        7,
        "adaptive q* closed form",
        [worst <= 2e-6, boundary_ok],
        f"max |closed form - grid argmin| = {worst:.2e} over the 11 x 11 x 6 grid "
        f"(<= 2e-6); boundary cases p=0 -> 0, lambda=1 -> 1, f_t=0 -> 0 hold exactly: {boundary_ok}",
    )


def criterion_8_adaptive_boundary() -> CriterionResult:
    cfg = load_config("c8_adaptive_boundary.cfg")
    records = run_experiment(cfg)[0].records
    caught_at = min(
        (r.iteration for r in records if r.identified_cum == cfg.f), default=None
    )
    eliminated = caught_at is not None
    pre = [r for r in records if not eliminated or r.iteration <= caught_at]
    hot = [r for r in pre if r.loss > 5.0]
    hot_ok = bool(hot) and all(r.lambda_t > 0.99 and r.q_t >= 0.9 for r in hot)
    post = [r for r in records if eliminated and r.iteration > caught_at]
    post_ok = bool(post) and all(r.q_t == 0.0 for r in post)
    return _result(
        8,
        "adaptive boundary behaviour",
        [eliminated, hot_ok, post_ok],
        f"{len(hot)} early rounds with loss > 5 all had lambda_t > 0.99 and q_t >= 0.9: {hot_ok}; "
        f"all {len(post)} rounds after full elimination (iteration {caught_at}) had q_t = 0: {post_ok}",
    )


def criterion_9_linear_code() -> CriterionResult:
    rng = np.random.default_rng(990001)
    recon_ok = True
    detect_ok = True
    for trial in range(1000):
        g1, g2, g3 = (rng.standard_normal(3) for _ in range(3))
        c1 = linear_encode(1, g1, g2)
        c2 = linear_encode(2, g2, g3)
        c3 = linear_encode(3, g3, g1)
        total = g1 + g2 + g3
        for recon in (c1 + c2, -(c2 + c3), 0.5 * (c1 - c3)):
            if np.max(np.abs(recon - total)) > 1e-9:
                recon_ok = False
        detected, reported = linear_check(c1, c2, c3, tol=1e-9)
        if detected or np.max(np.abs(reported - total)) > 1e-9:
            recon_ok = False
        # tamper exactly one symbol with a non-negligible perturbation
        symbols = [c1, c2, c3]
        victim = int(rng.integers(3))
        noise = rng.standard_normal(3)
        while np.max(np.abs(noise)) < 1e-6:
            noise = rng.standard_normal(3)
        symbols[victim] = symbols[victim] + noise
        detected, _ = linear_check(*symbols, tol=1e-9)
        if not detected:
            detect_ok = False
    return _result(
        9,
        "linear detection code",
        [recon_ok, detect_ok],
        f"all three reconstructions equal the gradient sum within 1e-9: {recon_ok}; "
        f"1000 random single-symbol tampers all detected: {detect_ok}",
    )


def criterion_10_numerical_hygiene() -> CriterionResult:
    rng = np.random.default_rng(101001)
    h = 1e-6
    worst = 0.0
    for task in ("linear_regression", "logistic_regression"):
        for _ in range(100):
            w = Parameter(value=rng.standard_normal(3))
            if task == "logistic_regression":
                label = 1.0 if rng.random() < 0.5 else -1.0
            else:
                label = float(rng.standard_normal())
            z = DataPoint(features=rng.standard_normal(3), label=label)
            analytic = gradient(task, w, z)
            fd = np.zeros(3)
            for i in range(3):
                wp, wm = np.array(w.value), np.array(w.value)
                wp[i] += h
                wm[i] -= h
                fd[i] = (
                    point_loss(task, Parameter(wp), z)
                    - point_loss(task, Parameter(wm), z)
                ) / (2 * h)
            err = float(np.linalg.norm(analytic - fd) / max(1.0, np.linalg.norm(fd)))
            worst = max(worst, err)
    # determinism spot check: the same config generates byte-identical CSVs
    import tempfile
    from pathlib import Path

    cfg = load_config("c3_worst_case.cfg")
    cfg.T = 20
    with tempfile.TemporaryDirectory() as tmp:
        a = emit_csv(run_experiment(cfg), Path(tmp) / "a.csv")
        b = emit_csv(run_experiment(cfg), Path(tmp) / "b.csv")
        deterministic = a.read_bytes() == b.read_bytes()
    return _result(
        10,
        "numerical hygiene",
        [worst <= 1e-5, deterministic],
        f"worst gradient vs central-finite-difference relative error {worst:.2e} "
        f"over 100 probes per task (<= 1e-5); repeated runs byte-identical: {deterministic}",
    )


CRITERIA = (
    criterion_1_exact_fault_tolerance,
    criterion_2_no_fault_efficiency,
    criterion_3_worst_case_efficiency,
    criterion_4_efficiency_bound,
    criterion_5_faulty_update_probability,
    criterion_6_identification_bound,
    criterion_7_q_star_closed_form,
    criterion_8_adaptive_boundary,
    criterion_9_linear_code,
    criterion_10_numerical_hygiene,
)


def run_suite(only=None) -> list[CriterionResult]:
    """Run the acceptance criteria (all, or the 1-based subset in ``only``)."""
    results = []
    for index, criterion in enumerate(CRITERIA, start=1):
        if only and index not in only:
            continue
        results.append(criterion())
    return results
