"""Byzantine worker behaviour.

A Byzantine worker flips one coin per iteration; on heads it replaces every
gradient copy it sends that iteration with a tampered value. Lies are sticky:
asked again for the same point later in the iteration (e.g. when recruited
for extra redundancy), the worker repeats the same lie, except under the
``inconsistent_copies`` strategy which re-randomizes on every request.

Every tampered value is guaranteed to differ from the honest one, and every
tampering event is logged in a TamperRecord so tests can check the protocol
against ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import Symbol

STRATEGIES = ("sign_flip", "gaussian_noise", "constant", "zero", "inconsistent_copies")


@dataclass(frozen=True)
class AdversaryConfig:
    """Which workers are Byzantine and how they lie.

    ``tamper_prob`` is the per-iteration tampering probability shared by all
    Byzantine workers unless overridden per worker.
    """

    byzantine: frozenset[int]
    tamper_prob: float = 1.0
    strategy: str = "sign_flip"
    noise_sigma: float = 1.0
    constant: tuple[float, ...] | None = None
    prob_overrides: tuple[tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 0.0 <= self.tamper_prob <= 1.0:
            raise ValueError(f"tamper probability must lie in [0, 1], got {self.tamper_prob}")

    def p_for(self, worker: int) -> float:
        for w, p in self.prob_overrides:
            if w == worker:
                return p
        return self.tamper_prob


@dataclass(frozen=True)
class TamperRecord:
    """Ground truth for one tampering event: what was replaced with what."""

    iteration: int
    worker: int
    points: tuple[int, ...]
    honest: tuple[np.ndarray, ...]
    sent: tuple[np.ndarray, ...]


class TamperStream:
    """One Byzantine worker's randomness for one iteration.

    The iteration coin and a base key are drawn up front from the supplied
    generator; per-point lie streams are derived from the base key, so
    recomputing a point's lie later in the iteration reproduces it exactly.
    ``fresh_rng`` keeps advancing and backs the inconsistent_copies strategy.
    """

    def __init__(self, rng: np.random.Generator):
        self._coin = float(rng.random())
        self._base = int(rng.integers(0, 2**63))
        self._fresh = rng

    def tampers(self, p: float) -> bool:
        return self._coin < p

    def point_rng(self, point: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence((self._base, point)))

    def fresh_rng(self) -> np.random.Generator:
        return self._fresh


def tamper_value(
    g: np.ndarray,
    strategy: str,
    rng: np.random.Generator,
    *,
    sigma: float = 1.0,
    constant: tuple[float, ...] | None = None,
) -> np.ndarray:
    """A vector guaranteed to differ from ``g`` under the given strategy.

    Collisions (a candidate equal to the honest value, e.g. negating a zero
    gradient) fall back to additive noise until the values differ.
    """
    if strategy == "sign_flip":
        candidate = -g
    elif strategy in ("gaussian_noise", "inconsistent_copies"):
        candidate = g + sigma * rng.standard_normal(g.shape)
    elif strategy == "constant":
        if constant is None:
            raise ValueError("constant strategy requires a configured vector")
        candidate = np.array(constant, dtype=float)
        if candidate.shape != g.shape:
            raise ValueError("constant vector dimension disagrees with gradient")
    elif strategy == "zero":
        candidate = np.zeros_like(g)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    while np.array_equal(candidate, g):
        candidate = g + max(sigma, 1.0) * rng.standard_normal(g.shape)
    return candidate


def act(worker, honest_payload, iteration, config: AdversaryConfig, stream: TamperStream):
    """Possibly replace a Byzantine worker's payload for this iteration.

    With probability p (one coin per worker per iteration, shared across all
    of the worker's messages that iteration) every gradient copy in the
    payload is replaced per the strategy and a TamperRecord is returned;
    otherwise the payload passes through untouched.
    """
    if not stream.tampers(config.p_for(worker)) or not honest_payload.payload:
        return honest_payload, None
    points = []
    honest = []
    sent = []
    for point, g in honest_payload.payload:
        if config.strategy == "inconsistent_copies":
            rng = stream.fresh_rng()
        else:
            rng = stream.point_rng(point)
        lie = tamper_value(
            g, config.strategy, rng, sigma=config.noise_sigma, constant=config.constant
        )
        points.append(point)
        honest.append(g)
        sent.append(lie)
    record = TamperRecord(
        iteration=iteration,
        worker=worker,
        points=tuple(points),
        honest=tuple(honest),
        sent=tuple(sent),
    )
    tampered = Symbol(
        worker=honest_payload.worker,
        payload=tuple((p, s) for p, s in zip(points, sent)),
    )
    return tampered, record
