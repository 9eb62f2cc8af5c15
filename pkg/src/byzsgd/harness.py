"""Experiment configuration, CSV emission and metrics aggregation.

Config files are flat ``section.key = value`` text. The CSV written by
``emit_csv`` is the durable contract: one row per (trial, iteration) with a
fixed column order, reals at 17 significant digits, deterministic bytes for
the same records.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

from .adversary import STRATEGIES, AdversaryConfig
from .engine import RoundRecord, TrialResult
from .policy import SCHEMES, prob_faulty_update

CSV_COLUMNS = (
    "trial",
    "iteration",
    "scheme",
    "loss",
    "dist_to_opt",
    "gradients_computed",
    "gradients_used",
    "efficiency",
    "fault_check",
    "suspects",
    "identified_cum",
    "update_faulty",
    "q_t",
    "lambda_t",
)

OUTPUT_DIR_ENV = "BYZSGD_OUT_DIR"


class ConfigError(Exception):
    """Invalid experiment configuration; carries one diagnostic per violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentConfig:
    scheme: str = "traditional"
    n: int = 3
    f: int = 0
    m: int = 1
    T: int = 1
    trials: int = 1
    seed: int = 0
    eliminate: bool = True
    task: str = "linear_regression"
    N: int = 10
    d: int = 1
    eta0: float = 0.1
    gamma: float = 0.01
    strategy: str = "sign_flip"
    p: float = 0.0
    byzantine: tuple[int, ...] | None = None  # None -> first f worker ids
    noise_sigma: float = 1.0
    constant: tuple[float, ...] | None = None
    q: float | None = None
    delta: float | None = None
    adaptive_p: float | None = None
    loss_source: str = "exact"
    trim: int | None = None
    w0_offset: float | None = None
    output: str = "records.csv"

    def byzantine_ids(self) -> tuple[int, ...]:
        if self.byzantine is not None:
            return self.byzantine
        return tuple(range(self.f))

    def adversary_config(self) -> AdversaryConfig:
        return AdversaryConfig(
            byzantine=frozenset(self.byzantine_ids()),
            tamper_prob=self.p,
            strategy=self.strategy,
            noise_sigma=self.noise_sigma,
            constant=self.constant,
        )

    def validate(self) -> list[str]:
        problems = []
        if self.scheme not in SCHEMES:
            problems.append(f"run.scheme: unknown scheme {self.scheme!r}")
        if self.n < 1:
            problems.append(f"run.n: need at least one worker, got {self.n}")
        if not self.f < self.n / 2:
            problems.append(f"run.f: f < n/2 violated (f={self.f}, n={self.n})")
        if self.f < 0:
            problems.append(f"run.f: must be non-negative, got {self.f}")
        if self.m < 1:
            problems.append(f"run.m: need at least one point per round, got {self.m}")
        if self.m > self.N:
            problems.append(f"run.m: batch {self.m} exceeds data.N={self.N}")
        if self.T < 1:
            problems.append(f"run.T: need at least one iteration, got {self.T}")
        if self.trials < 1:
            problems.append(f"run.trials: need at least one trial, got {self.trials}")
        if self.task not in ("linear_regression", "logistic_regression"):
            problems.append(f"data.task: unknown task {self.task!r}")
        if self.d < 1 or self.N < self.d:
            problems.append(f"data: need N >= d >= 1, got N={self.N}, d={self.d}")
        if self.eta0 <= 0:
            problems.append(f"sgd.eta0: step size must be positive, got {self.eta0}")
        if self.gamma < 0:
            problems.append(f"sgd.gamma: decay must be non-negative, got {self.gamma}")
        if self.strategy not in STRATEGIES:
            problems.append(f"adversary.strategy: unknown strategy {self.strategy!r}")
        if not 0.0 <= self.p <= 1.0:
            problems.append(f"adversary.p: must lie in [0, 1], got {self.p}")
        ids = self.byzantine_ids()
        if len(set(ids)) != len(ids):
            problems.append("adversary.ids: duplicate worker ids")
        elif any(w < 0 or w >= self.n for w in ids):
            problems.append(f"adversary.ids: ids must lie in [0, {self.n - 1}]")
        elif len(ids) > self.f:
            problems.append(
                f"adversary.ids: {len(ids)} Byzantine workers exceed the budget f={self.f}"
            )
        if self.strategy == "constant" and self.constant is None:
            problems.append("adversary.constant: required for the constant strategy")
        if self.scheme == "randomized":
            if (self.q is None) == (self.delta is None):
                problems.append(
                    "randomized: exactly one of randomized.q / randomized.delta must be set"
                )
            if self.q is not None and not 0.0 <= self.q <= 1.0:
                problems.append(f"randomized.q: must lie in [0, 1], got {self.q}")
            if self.delta is not None and self.f < 1:
                problems.append("randomized.delta: needs f >= 1")
        if self.scheme == "adaptive":
            if self.adaptive_p is None:
                problems.append("adaptive.p: required for the adaptive scheme")
            elif not 0.0 <= self.adaptive_p <= 1.0:
                problems.append(f"adaptive.p: must lie in [0, 1], got {self.adaptive_p}")
            if self.loss_source not in ("exact", "trimmed"):
                problems.append(
                    f"adaptive.loss_source: must be exact or trimmed, got {self.loss_source!r}"
                )
            if self.trim is not None and self.trim < 0:
                problems.append(f"adaptive.trim: must be non-negative, got {self.trim}")
        return problems


_INT_KEYS = {
    "run.n": "n",
    "run.f": "f",
    "run.m": "m",
    "run.T": "T",
    "run.trials": "trials",
    "run.seed": "seed",
    "data.N": "N",
    "data.d": "d",
    "adaptive.trim": "trim",
}
_FLOAT_KEYS = {
    "sgd.eta0": "eta0",
    "sgd.gamma": "gamma",
    "adversary.p": "p",
    "adversary.sigma": "noise_sigma",
    "randomized.q": "q",
    "randomized.delta": "delta",
    "adaptive.p": "adaptive_p",
    "init.offset": "w0_offset",
}
_STR_KEYS = {
    "run.scheme": "scheme",
    "data.task": "task",
    "adversary.strategy": "strategy",
    "adaptive.loss_source": "loss_source",
    "output.path": "output",
}
_BOOL_KEYS = {"run.eliminate": "eliminate"}
_LIST_KEYS = {"adversary.ids": "byzantine", "adversary.constant": "constant"}


def parse_config(path) -> ExperimentConfig:
    """Parse and validate a flat key-value config file.

    Raises ConfigError with one diagnostic per violated invariant, including
    the offending line for syntax problems.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    cfg = ExperimentConfig()
    problems: list[str] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {raw!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not value:
            continue  # empty value means "leave at default"
        try:
            if key in _INT_KEYS:
                setattr(cfg, _INT_KEYS[key], int(value))
            elif key in _FLOAT_KEYS:
                setattr(cfg, _FLOAT_KEYS[key], float(value))
            elif key in _STR_KEYS:
                setattr(cfg, _STR_KEYS[key], value)
            elif key in _BOOL_KEYS:
                if value.lower() not in ("true", "false"):
                    raise ValueError(f"expected true/false, got {value!r}")
                setattr(cfg, _BOOL_KEYS[key], value.lower() == "true")
            elif key in _LIST_KEYS:
                parts = [v.strip() for v in value.split(",") if v.strip()]
                if key == "adversary.ids":
                    cfg.byzantine = tuple(int(v) for v in parts)
                else:
                    cfg.constant = tuple(float(v) for v in parts)
            else:
                problems.append(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            problems.append(f"line {lineno}: {key}: {exc}")
    problems.extend(cfg.validate())
    if problems:
        raise ConfigError(problems)
    return cfg


def resolve_output_path(path) -> Path:
    """Apply the output-directory environment override, if set."""
    path = Path(path)
    override = os.environ.get(OUTPUT_DIR_ENV)
    if override:
        return Path(override) / path.name
    return path


def _records_per_trial(results) -> list[list[RoundRecord]]:
    out = []
    for entry in results:
        out.append(entry.records if isinstance(entry, TrialResult) else list(entry))
    return out


def _real(x: float) -> str:
    return format(float(x), ".17g")


def emit_csv(results, path) -> Path:
    """Write one row per (trial, iteration); byte-deterministic for the same
    records. Returns the resolved output path."""
    per_trial = _records_per_trial(results)
    if not per_trial or not any(per_trial):
        raise ValueError("no records to emit")
    path = resolve_output_path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(CSV_COLUMNS)]
    for records in per_trial:
        for r in records:
            lines.append(
                ",".join(
                    (
                        str(r.trial),
                        str(r.iteration),
                        r.scheme,
                        _real(r.loss),
                        _real(r.dist_to_opt),
                        str(r.gradients_computed),
                        str(r.gradients_used),
                        _real(r.efficiency),
                        "true" if r.fault_check else "false",
                        str(r.suspects),
                        str(r.identified_cum),
                        "true" if r.update_faulty else "false",
                        _real(r.q_t),
                        _real(r.lambda_t),
                    )
                )
            )
    path.write_text("\n".join(lines) + "\n")
    return path


def load_csv(path) -> list[list[RoundRecord]]:
    """Read an emitted CSV back into per-trial record lists.

    The sampled point indices and per-round identified sets are not part of
    the CSV contract and come back empty; every aggregate in ``summarize``
    works from the columns alone.
    """
    lines = Path(path).read_text().splitlines()
    if not lines or tuple(lines[0].split(",")) != CSV_COLUMNS:
        raise ValueError(f"{path} is not a recognized records CSV")
    trials: dict[int, list[RoundRecord]] = {}
    for line in lines[1:]:
        if not line:
            continue
        v = line.split(",")
        trial = int(v[0])
        record = RoundRecord(
            trial=trial,
            iteration=int(v[1]),
            scheme=v[2],
            sampled=(),
            fault_check=v[8] == "true",
            suspects=int(v[9]),
            identified=frozenset(),
            identified_cum=int(v[10]),
            gradients_computed=int(v[5]),
            gradients_used=int(v[6]),
            update_faulty=v[11] == "true",
            loss=float(v[3]),
            dist_to_opt=float(v[4]),
            q_t=float(v[12]),
            lambda_t=float(v[13]),
        )
        trials.setdefault(trial, []).append(record)
    return [trials[k] for k in sorted(trials)]


@dataclass
class MetricsSummary:
    """Aggregates over per-round records; everything here is recomputable
    from the CSV columns."""

    trials: int
    iterations: int
    scheme: str
    overall_efficiency: float  # total used / total computed
    mean_round_efficiency: float  # mean of per-round ratios
    efficiency_by_iteration: tuple[float, ...]
    loss_by_iteration: tuple[float, ...]
    final_dist_to_opt: float
    fault_check_rate: float
    faulty_update_rate: float
    suspect_rounds: int
    identification_iterations: tuple[int, ...]
    mean_identification_iteration: float | None
    mean_q: float
    mean_lambda: float
    efficiency_bound: float | None = None
    predicted_faulty_rate: float | None = None


def summarize(results, f: int | None = None, p: float | None = None) -> MetricsSummary:
    """Aggregate per-trial records.

    ``f`` and ``p`` are configuration facts that the CSV does not carry; when
    given, the summary also reports the efficiency lower bound and the
    faulty-update probability they predict for the recorded mean q.
    """
    per_trial = _records_per_trial(results)
    per_trial = [records for records in per_trial if records]
    if not per_trial:
        raise ValueError("no records to summarize")
    iterations = max(len(records) for records in per_trial)
    total_used = sum(r.gradients_used for records in per_trial for r in records)
    total_computed = sum(r.gradients_computed for records in per_trial for r in records)
    all_records = [r for records in per_trial for r in records]
    n_rounds = len(all_records)
    eff_by_iter = []
    loss_by_iter = []
    for t in range(iterations):
        at_t = [records[t] for records in per_trial if t < len(records)]
        eff_by_iter.append(sum(r.efficiency for r in at_t) / len(at_t))
        loss_by_iter.append(sum(r.loss for r in at_t) / len(at_t))
    ident_iters = []
    for records in per_trial:
        prev = 0
        for r in records:
            for _ in range(r.identified_cum - prev):
                ident_iters.append(r.iteration)
            prev = r.identified_cum
    mean_q = sum(r.q_t for r in all_records) / n_rounds
    summary = MetricsSummary(
        trials=len(per_trial),
        iterations=iterations,
        scheme=all_records[0].scheme,
        overall_efficiency=total_used / total_computed,
        mean_round_efficiency=sum(r.efficiency for r in all_records) / n_rounds,
        efficiency_by_iteration=tuple(eff_by_iter),
        loss_by_iteration=tuple(loss_by_iter),
        final_dist_to_opt=sum(records[-1].dist_to_opt for records in per_trial)
        / len(per_trial),
        fault_check_rate=sum(r.fault_check for r in all_records) / n_rounds,
        faulty_update_rate=sum(r.update_faulty for r in all_records) / n_rounds,
        suspect_rounds=sum(1 for r in all_records if r.suspects > 0),
        identification_iterations=tuple(sorted(ident_iters)),
        mean_identification_iteration=(
            sum(ident_iters) / len(ident_iters) if ident_iters else None
        ),
        mean_q=mean_q,
        mean_lambda=sum(r.lambda_t for r in all_records) / n_rounds,
    )
    if f is not None:
        from .policy import efficiency_lower_bound

        summary.efficiency_bound = efficiency_lower_bound(mean_q, f)
        if p is not None:
            summary.predicted_faulty_rate = prob_faulty_update(mean_q, p, f)
    return summary


def format_summary(summary: MetricsSummary) -> str:
    lines = [
        f"scheme               {summary.scheme}",
        f"trials x iterations  {summary.trials} x {summary.iterations}",
        f"overall efficiency   {summary.overall_efficiency:.6f}",
        f"mean round efficiency {summary.mean_round_efficiency:.6f}",
        f"fault-check rate     {summary.fault_check_rate:.6f}",
        f"faulty-update rate   {summary.faulty_update_rate:.6f}",
        f"suspect rounds       {summary.suspect_rounds}",
        f"final dist to w*     {summary.final_dist_to_opt:.6e}",
        f"mean q_t             {summary.mean_q:.6f}",
        f"mean lambda_t        {summary.mean_lambda:.6f}",
    ]
    if summary.mean_identification_iteration is not None:
        lines.append(
            "identifications      "
            f"{len(summary.identification_iterations)} "
            f"(mean iteration {summary.mean_identification_iteration:.2f})"
        )
    if summary.efficiency_bound is not None:
        lines.append(f"efficiency bound     {summary.efficiency_bound:.6f}")
    if summary.predicted_faulty_rate is not None:
        lines.append(f"predicted faulty rate {summary.predicted_faulty_rate:.6f}")
    return "\n".join(lines)
