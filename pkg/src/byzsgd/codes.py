"""Fault-detection codes over gradient copies.

The workhorse is a replication code: every data point is computed by several
workers, copies are compared for exact equality, and disagreements trigger
reactive redundancy until a strict majority pins down the correct value and
exposes the liars. A small linear detection code for the 3-worker /
1-fault configuration is provided as a second, algebraic code.

Copy equality is exact value equality (``np.array_equal``); honest workers
recompute bit-identical gradients, so any tampering is a visible mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Assignment:
    """Map from data-point index (within the round's sample) to the ordered
    distinct worker ids responsible for it. ``degree`` is the base replication
    factor; points augmented by reactive redundancy carry extra assignees."""

    assignees: dict[int, tuple[int, ...]]
    degree: int

    def workers_of(self, point: int) -> tuple[int, ...]:
        return self.assignees[point]

    def loads(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for ws in self.assignees.values():
            for w in ws:
                out[w] = out.get(w, 0) + 1
        return out


@dataclass(frozen=True)
class Symbol:
    """One worker's message for a round: ordered (point, gradient) pairs."""

    worker: int
    payload: tuple[tuple[int, np.ndarray], ...]


@dataclass(frozen=True)
class DetectionReport:
    """Points whose copies disagree, plus all copies kept for identification."""

    suspects: frozenset[int]
    copies: dict[int, dict[int, np.ndarray]]


def replicate_assign(m: int, active_workers, degree: int, seed) -> Assignment:
    """Assign each of ``m`` points to ``degree`` distinct workers.

    Slots walk a seeded permutation of the workers cyclically, so worker
    loads differ by at most one and the result is deterministic in the seed.
    """
    workers = tuple(sorted(active_workers))
    if m < 1:
        raise ValueError(f"need at least one point, got m={m}")
    if degree < 1:
        raise ValueError(f"replication degree must be >= 1, got {degree}")
    if degree > len(workers):
        raise ValueError(
            f"insufficient workers: degree {degree} > {len(workers)} active"
        )
    order = [workers[i] for i in np.random.default_rng(seed).permutation(len(workers))]
    W = len(order)
    assignees = {
        p: tuple(order[(p * degree + k) % W] for k in range(degree)) for p in range(m)
    }
    return Assignment(assignees=assignees, degree=degree)


def detect(copies: dict[int, dict[int, np.ndarray]]) -> DetectionReport:
    """Mark a point suspect iff its delivered copies are not all identical."""
    suspects = set()
    for point in sorted(copies):
        per_worker = copies[point]
        if len(per_worker) < 2:
            raise ValueError(
                f"point {point} has a single copy; comparison needs at least two"
            )
        ordered = [per_worker[w] for w in sorted(per_worker)]
        ref = ordered[0]
        if any(not np.array_equal(ref, g) for g in ordered[1:]):
            suspects.add(point)
    return DetectionReport(suspects=frozenset(suspects), copies=copies)


def reactive_assign(
    suspects, existing: Assignment, f_t: int, active_workers, seed
) -> Assignment:
    """Grant each suspect point ``f_t`` additional distinct workers.

    New assignees are drawn uniformly without replacement from the active
    workers not already responsible for the point. Non-suspects are untouched.
    """
    active = tuple(sorted(active_workers))
    rng = np.random.default_rng(seed)
    assignees = dict(existing.assignees)
    for point in sorted(suspects):
        current = set(assignees[point])
        pool = [w for w in active if w not in current]
        if len(pool) < f_t:
            raise ValueError(
                f"insufficient workers: point {point} needs {f_t} fresh assignees, "
                f"only {len(pool)} available"
            )
        picks = rng.choice(len(pool), size=f_t, replace=False)
        assignees[point] = assignees[point] + tuple(pool[int(i)] for i in picks)
    return Assignment(assignees=assignees, degree=existing.degree)


def _canonical(g: np.ndarray) -> bytes:
    # +0.0 folds -0.0 into +0.0 so byte grouping matches value equality.
    return (g + 0.0).tobytes()


def identify(copies: dict[int, np.ndarray], f_t: int) -> tuple[np.ndarray, frozenset[int]]:
    """Majority-vote resolution over >= 2*f_t + 1 copies of one gradient.

    Returns the value held by at least f_t + 1 workers (unique when at most
    f_t copies are faulty) and the set of workers whose copy differs from it.
    """
    if len(copies) < 2 * f_t + 1:
        raise ValueError(
            f"need at least {2 * f_t + 1} copies for majority voting, got {len(copies)}"
        )
    groups: dict[bytes, tuple[np.ndarray, list[int]]] = {}
    for worker in sorted(copies):
        key = _canonical(copies[worker])
        if key in groups:
            groups[key][1].append(worker)
        else:
            groups[key] = (copies[worker], [worker])
    majority = [entry for entry in groups.values() if len(entry[1]) >= f_t + 1]
    if not majority:
        raise ValueError(
            "no majority value among copies; more faults than the configured budget"
        )
    value, members = majority[0]
    identified = frozenset(w for w in copies if w not in members)
    return value, identified


def linear_encode(role: int, g_a: np.ndarray, g_b: np.ndarray) -> np.ndarray:
    """Encoded symbol for the 3-worker / 1-fault linear detection code.

    Workers hold point pairs (z1, z2), (z2, z3), (z3, z1); ``g_a`` and ``g_b``
    are the gradients of the worker's pair in that order. The three symbols
    satisfy c1 + c2 = -(c2 + c3) = (c1 - c3)/2 = g1 + g2 + g3, which is what
    ``linear_check`` exploits.
    """
    if g_a.shape != g_b.shape:
        raise ValueError("gradient dimensions disagree")
    if role == 1:
        return g_a + 2.0 * g_b
    if role == 2:
        return -g_a + g_b
    if role == 3:
        return -g_b - 2.0 * g_a
    raise ValueError(f"linear code only defines workers 1..3, got role {role}")


def linear_check(
    c1: np.ndarray, c2: np.ndarray, c3: np.ndarray, tol: float
) -> tuple[bool, np.ndarray | None]:
    """Compare the three reconstructions of the gradient sum.

    Returns (detected=False, sum) when all reconstructions agree within
    ``tol`` componentwise, else (detected=True, None).
    """
    if not (c1.shape == c2.shape == c3.shape):
        raise ValueError("symbol dimensions disagree")
    r1 = c1 + c2
    r2 = -(c2 + c3)
    r3 = 0.5 * (c1 - c3)
    agree = (
        np.all(np.abs(r1 - r2) <= tol)
        and np.all(np.abs(r1 - r3) <= tol)
        and np.all(np.abs(r2 - r3) <= tol)
    )
    if agree:
        return False, r1
    return True, None
