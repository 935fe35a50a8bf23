"""Utility scoring of update subsets and Shapley contribution estimates.

A round's utility function scores a coalition of client updates by the
test-set improvement of the candidate model built from them.  Contribution
vectors come from either exact subset enumeration (small games only) or
the truncated Monte-Carlo permutation estimator, which freezes a prefix
scan once the running prefix value is within ``eps`` of the full-coalition
value.

Subset values are cached per round so overlapping prefix scans share work;
``queries`` counts every lookup and ``evaluations`` only cache misses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, permutations as iter_permutations
from typing import Callable, Sequence

import numpy as np

from . import losses
from .data import Dataset
from .rng import RngStream

MEAN_WEIGHTING = "mean"
SUM_WEIGHTING = "sum"

EXACT_SHAPLEY_MAX_PLAYERS = 10


class OracleSizeError(ValueError):
    """Exact enumeration requested for too many participants."""


@dataclass(frozen=True)
class ContributionVector:
    u: dict[int, float]
    permutations_used: int
    truncation_eps: float


@dataclass(frozen=True)
class PermutationPlan:
    """How to draw permutations: sampled from a stream, or an explicit list."""
    delta: int
    eps: float
    stream: RngStream | None = None
    permutations: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if self.permutations is not None:
            object.__setattr__(self, "delta", len(self.permutations))
        if self.delta < 1:
            raise ValueError("need at least one permutation")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.permutations is None and self.stream is None:
            raise ValueError("either a stream or explicit permutations is required")


def all_permutations_plan(participants: Sequence[int], eps: float = 0.0) -> PermutationPlan:
    """Plan enumerating every ordering of the participants."""
    perms = tuple(iter_permutations(tuple(participants)))
    return PermutationPlan(delta=len(perms), eps=eps, permutations=perms)


class UtilityContext:
    """Round-scoped utility: candidate models from client deltas, scored on test data.

    The candidate for a subset S is the round-start model plus the mean of
    the subset's deltas (``mean`` weighting) or ``nu`` times their sum
    (``sum`` weighting).  The returned score is ``v_ref`` minus the mean
    test loss; with the default ``v_ref`` (test loss of the round-start
    model) the empty coalition scores exactly zero.
    """

    def __init__(self, phi_t: np.ndarray, deltas: dict[int, np.ndarray],
                 test_set: Dataset, loss: str, v_ref: float | None = None,
                 weighting: str = MEAN_WEIGHTING, nu: float = 1.0):
        if weighting not in (MEAN_WEIGHTING, SUM_WEIGHTING):
            raise ValueError(f"unknown weighting {weighting!r}")
        if len(test_set) == 0:
            raise ValueError("test set must be non-empty")
        losses.check_kind(loss)
        self.phi_t = np.asarray(phi_t, dtype=np.float64)
        self.deltas = {int(c): np.asarray(dv, dtype=np.float64) for c, dv in deltas.items()}
        self.test_set = test_set
        self.loss = loss
        self.weighting = weighting
        self.nu = nu
        self.queries = 0
        self.evaluations = 0
        self._cache: dict[frozenset[int], float] = {}
        if v_ref is None:
            v_ref = losses.mean_loss(loss, self.phi_t, test_set.features, test_set.labels)
        self.v_ref = float(v_ref)

    def candidate_model(self, subset: frozenset[int]) -> np.ndarray:
        if not subset:
            return self.phi_t
        total = np.zeros_like(self.phi_t)
        for c in sorted(subset):
            total += self.deltas[c]
        scale = 1.0 / len(subset) if self.weighting == MEAN_WEIGHTING else self.nu
        return self.phi_t + scale * total

    def value(self, subset) -> float:
        subset = frozenset(int(c) for c in subset)
        unknown = subset - self.deltas.keys()
        if unknown:
            raise LookupError(f"unknown client ids {sorted(unknown)}")
        self.queries += 1
        cached = self._cache.get(subset)
        if cached is not None:
            return cached
        self.evaluations += 1
        w = self.candidate_model(subset)
        score = self.v_ref - losses.mean_loss(self.loss, w, self.test_set.features,
                                              self.test_set.labels)
        self._cache[subset] = score
        return score


class GameUtility:
    """Utility backed by an arbitrary set function; same counting interface."""

    def __init__(self, fn: Callable[[frozenset[int]], float]):
        self._fn = fn
        self.queries = 0
        self.evaluations = 0
        self._cache: dict[frozenset[int], float] = {}

    def value(self, subset) -> float:
        subset = frozenset(int(c) for c in subset)
        self.queries += 1
        if subset not in self._cache:
            self.evaluations += 1
            self._cache[subset] = float(self._fn(subset))
        return self._cache[subset]


def utility(ctx, subset) -> float:
    return ctx.value(frozenset(subset))


def exact_shapley(ctx, participants: Sequence[int]) -> ContributionVector:
    """Exact Shapley values by subset enumeration with multiplicity weights."""
    players = [int(p) for p in participants]
    m = len(players)
    if m > EXACT_SHAPLEY_MAX_PLAYERS:
        raise OracleSizeError(f"{m} participants exceed the enumeration limit "
                              f"of {EXACT_SHAPLEY_MAX_PLAYERS}")
    fact = math.factorial
    weights = [fact(k) * fact(m - 1 - k) / fact(m) for k in range(m)]
    u = {p: 0.0 for p in players}
    for n in players:
        others = [p for p in players if p != n]
        for k in range(m):
            for combo in combinations(others, k):
                s = frozenset(combo)
                marginal = ctx.value(s | {n}) - ctx.value(s)
                u[n] += weights[k] * marginal
    return ContributionVector(u=u, permutations_used=fact(m), truncation_eps=0.0)


def _fisher_yates(gen: np.random.Generator, items: Sequence[int]) -> tuple[int, ...]:
    arr = list(items)
    for i in range(len(arr) - 1, 0, -1):
        j = int(gen.integers(0, i + 1))
        arr[i], arr[j] = arr[j], arr[i]
    return tuple(arr)


def tmc_shapley(ctx, participants: Sequence[int], plan: PermutationPlan) -> ContributionVector:
    """Truncated Monte-Carlo Shapley over ``plan.delta`` permutations.

    Each permutation is scanned front to back, tracking the prefix value.
    Once the previous prefix value comes within ``plan.eps`` of the
    full-coalition value the rest of the scan is frozen (marginals of the
    remaining players are zero for that permutation).  Values are folded
    into a running mean in permutation order, so results are a pure
    function of the plan.
    """
    players = tuple(int(p) for p in participants)
    if plan.permutations is not None:
        perms = plan.permutations
    else:
        gen = plan.stream.generator()
        perms = tuple(_fisher_yates(gen, players) for _ in range(plan.delta))
    v_full = ctx.value(frozenset(players))
    u = {p: 0.0 for p in players}
    for c, perm in enumerate(perms, start=1):
        v_prev = ctx.value(frozenset())
        truncated = False
        prefix: set[int] = set()
        for n in perm:
            prefix.add(n)
            if not truncated and abs(v_full - v_prev) < plan.eps:
                truncated = True
            v_m = v_prev if truncated else ctx.value(frozenset(prefix))
            u[n] = ((c - 1) / c) * u[n] + (v_m - v_prev) / c
            v_prev = v_m
    return ContributionVector(u=u, permutations_used=len(perms), truncation_eps=plan.eps)


def efficiency_residual(u: ContributionVector, ctx, participants: Sequence[int]) -> float:
    """Sum of attributed values minus the grand-coalition improvement."""
    players = frozenset(int(p) for p in participants)
    return sum(u.u[p] for p in players) - (ctx.value(players) - ctx.value(frozenset()))
