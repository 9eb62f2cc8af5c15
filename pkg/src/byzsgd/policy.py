"""Decision rules and closed-form predictions for the fault-check policies.

Covers the expected-efficiency lower bound of the randomized scheme, the
probability of applying a faulty update, the identification-time bound, and
the adaptive rule that picks the fault-check probability by trading
computation efficiency against update reliability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SCHEMES = ("traditional", "deterministic", "randomized", "adaptive")


@dataclass
class PolicyState:
    """Mutable per-run policy state: residual fault budget and the knobs of
    the randomized/adaptive schemes."""

    scheme: str
    fault_budget: int  # configured number of Byzantine workers (f)
    identified: int = 0  # eliminated so far (kappa_t)
    q: float = 0.0  # fault-check probability in effect
    assumed_p: float = 0.0  # tamper probability assumed by the adaptive rule
    loss_weight: float = 0.0  # lambda_t of the adaptive objective
    loss_source: str = "exact"  # "exact" | "trimmed"
    trim: int | None = None  # trim count for the worker-reported loss; None -> f_t

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.fault_budget < 0:
            raise ValueError("fault budget must be non-negative")

    @property
    def residual_faults(self) -> int:
        """Unidentified fault budget f_t = f - kappa_t."""
        remaining = self.fault_budget - self.identified
        if remaining < 0:
            raise ValueError("more workers eliminated than the fault budget")
        return remaining


def _check_prob(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def efficiency_lower_bound(q: float, f: int) -> float:
    """Worst-case expected computation efficiency of the randomized scheme.

    A fault-check costs at most 2f extra copies per gradient, so the expected
    efficiency is at least (1 - q) + q/(2f + 1) = 1 - q * 2f / (2f + 1).
    """
    _check_prob("q", q)
    if f < 0:
        raise ValueError(f"fault budget must be non-negative, got {f}")
    return 1.0 - q * (2.0 * f / (2.0 * f + 1.0))


def q_for_delta(delta: float, f: int) -> float:
    """Fault-check probability that guarantees expected efficiency >= 1 - delta."""
    if f < 1:
        raise ValueError("need a positive fault budget to size the check probability")
    limit = 2.0 * f / (2.0 * f + 1.0)
    if not 0.0 < delta <= limit:
        raise ValueError(
            f"delta must lie in (0, {limit}] for f={f} (q would exceed 1), got {delta}"
        )
    return delta * (2.0 * f + 1.0) / (2.0 * f)


def prob_faulty_update(q: float, p: float, f_t: int) -> float:
    """Probability that an unchecked round applies at least one tampered gradient."""
    _check_prob("q", q)
    _check_prob("p", p)
    if f_t < 0:
        raise ValueError("residual fault budget must be non-negative")
    return (1.0 - (1.0 - p) ** f_t) * (1.0 - q)


def prob_unidentified(q: float, p_i: float, t: int) -> float:
    """Upper bound on a tampering worker staying unidentified after t rounds."""
    _check_prob("q", q)
    _check_prob("p_i", p_i)
    if t < 0:
        raise ValueError("iteration count must be non-negative")
    return (1.0 - q * p_i) ** t


def lambda_from_loss(loss: float) -> float:
    """Reliability weight 1 - exp(-loss): high observed loss favours checking."""
    if loss < 0.0:
        raise ValueError(f"loss must be non-negative, got {loss}")
    return 1.0 - math.exp(-loss)


def expected_efficiency(q: float, f_t: int) -> float:
    """Worst-case expected efficiency with f_t residual faults: (2 f_t (1-q) + 1) / (2 f_t + 1)."""
    _check_prob("q", q)
    if f_t < 0:
        raise ValueError("residual fault budget must be non-negative")
    return (2.0 * f_t * (1.0 - q) + 1.0) / (2.0 * f_t + 1.0)


def objective(q: float, loss_weight: float, p: float, f_t: int) -> float:
    """Weighted trade-off between inefficiency and faulty-update probability.

    (1 - lambda) * (1 - comEff(q))^2 + lambda * probF(q)^2, both squared terms
    evaluated at the residual fault budget f_t.
    """
    _check_prob("lambda", loss_weight)
    inefficiency = 1.0 - expected_efficiency(q, f_t)
    faulty = prob_faulty_update(q, p, f_t)
    return (1.0 - loss_weight) * inefficiency**2 + loss_weight * faulty**2


def q_star(loss_weight: float, p: float, f_t: int) -> float:
    """Closed-form minimizer of ``objective`` over q in [0, 1].

    With a = 2 f_t / (2 f_t + 1) and b = 1 - (1-p)^f_t the objective is
    (1-lambda) a^2 q^2 + lambda b^2 (1-q)^2, minimized at
    q* = lambda b^2 / ((1-lambda) a^2 + lambda b^2).

    Conventions for the degenerate cases: no residual faults or p = 0 make
    checking pointless, so q* = 0.
    """
    _check_prob("lambda", loss_weight)
    _check_prob("p", p)
    if f_t < 0:
        raise ValueError("residual fault budget must be non-negative")
    if f_t == 0 or p == 0.0:
        return 0.0
    a = 2.0 * f_t / (2.0 * f_t + 1.0)
    b = 1.0 - (1.0 - p) ** f_t
    denom = (1.0 - loss_weight) * a**2 + loss_weight * b**2
    if denom == 0.0:
        return 0.0
    return min(1.0, max(0.0, loss_weight * b**2 / denom))


def trimmed_mean(values, trim_count: int) -> float:
    """Mean after dropping the ``trim_count`` smallest and largest values."""
    ordered = sorted(float(v) for v in values)
    if trim_count < 0:
        raise ValueError("trim count must be non-negative")
    if len(ordered) <= 2 * trim_count:
        raise ValueError(
            f"cannot trim {trim_count} from each end of {len(ordered)} values"
        )
    kept = ordered[trim_count : len(ordered) - trim_count]
    return sum(kept) / len(kept)
