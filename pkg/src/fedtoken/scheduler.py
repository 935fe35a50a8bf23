"""Per-round orchestration: cohort sampling, selection, aggregation.

A round runs: sample a cohort, collect every member's local update, value
the updates (fedtoken policy only), pick at most ``quota`` of them, fold
the chosen deltas into the global model with step weight nu, commit the
matching dual steps, settle tokens, and append the round's block.  Clients
that were not selected discard their step, which keeps the global model
and the stitched dual state in exact correspondence.

The reduction over selected deltas runs in ascending client-id order so
floating-point sums are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tokenomics
from .data import ClientPartition, Dataset
from .dual import (DualState, GlobalModel, Hyperparams, commit, duality_gap,
                   local_solve, upload_size)
from .ledger import Chain
from .losses import mean_loss
from .rng import RngStream
from .tokenomics import AllocationPolicy, Budget
from .valuation import (ContributionVector, PermutationPlan, UtilityContext,
                        efficiency_residual, tmc_shapley)

FEDTOKEN = "fedtoken"
FEDAVG_ALL = "fedavg-all"
RANDOM_QUOTA = "random-quota"
AGGREGATION_POLICIES = (FEDTOKEN, FEDAVG_ALL, RANDOM_QUOTA)


class BudgetExhausted(RuntimeError):
    """Raised when a round is attempted after the budget ran out."""


@dataclass(frozen=True)
class RoundPlan:
    round: int
    cohort: tuple[int, ...]
    quota: int

    def __post_init__(self):
        if len(set(self.cohort)) != len(self.cohort):
            raise ValueError("cohort ids must be unique")
        if not 1 <= self.quota <= len(self.cohort):
            raise ValueError("quota must be in [1, cohort size]")


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[int, ...]
    rejected: tuple[int, ...]
    flagged_non_contributing: tuple[int, ...]


@dataclass
class RoundMetrics:
    round: int
    policy: str
    test_accuracy: float
    test_loss: float
    duality_gap: float
    contributions: dict[int, float]
    efficiency_residual: float | None  # None when valuation was skipped
    selected: tuple[int, ...]
    rejected: tuple[int, ...]
    flagged: tuple[int, ...]
    tokens_contribution: int
    tokens_participation: int
    budget_remaining: int
    uploaded_bytes: int
    committed_bytes: int
    utility_queries: int
    utility_evaluations: int
    block_hash: str

    def to_record(self) -> dict:
        rec = dict(self.__dict__)
        rec["record"] = "round"
        rec["contributions"] = {str(k): v for k, v in sorted(self.contributions.items())}
        rec["selected"] = list(self.selected)
        rec["rejected"] = list(self.rejected)
        rec["flagged"] = list(self.flagged)
        return rec


@dataclass
class SimulationState:
    train: Dataset            # ground-truth labels, used for clean evaluation
    effective_train: Dataset  # labels as clients actually train on them
    test: Dataset
    partitions: list[ClientPartition]
    model: GlobalModel
    alphas: dict[int, DualState]
    budget: Budget
    chain: Chain
    round: int = 0
    uploaded_bytes: int = 0
    committed_bytes: int = 0

    def dual_states(self):
        return [self.alphas[c] for c in sorted(self.alphas)]


def sample_cohort(n_clients: int, m_fraction: float, round_index: int,
                  stream: RngStream) -> tuple[int, ...]:
    """Uniform cohort of ceil(m_fraction * N) distinct ids, keyed by round."""
    if not 0.0 < m_fraction <= 1.0:
        raise ValueError("m_fraction must be in (0, 1]")
    size = max(1, int(np.ceil(m_fraction * n_clients)))
    gen = stream.scoped(round=round_index, client=0, purpose="cohort").generator()
    ids = gen.choice(n_clients, size=size, replace=False)
    return tuple(sorted(int(c) for c in ids))


def select_top_q(u: ContributionVector, quota: int) -> SelectionResult:
    """Top-quota clients by contribution, skipping everyone with u <= 0.

    Ties break toward the lower client id; the selected list is ordered by
    descending contribution.
    """
    if quota < 1:
        raise ValueError("quota must be >= 1")
    flagged = tuple(sorted(c for c, val in u.u.items() if val <= 0.0))
    positive = sorted((c for c, val in u.u.items() if val > 0.0),
                      key=lambda c: (-u.u[c], c))
    return SelectionResult(
        selected=tuple(positive[:quota]),
        rejected=tuple(positive[quota:]),
        flagged_non_contributing=flagged,
    )


def aggregate(phi_t: np.ndarray, selection: SelectionResult,
              deltas: dict[int, np.ndarray], nu: float) -> np.ndarray:
    """phi + nu * sum of selected deltas; an empty selection is a no-op."""
    phi = np.array(phi_t, dtype=np.float64)
    for c in sorted(selection.selected):
        phi += nu * deltas[c]
    return phi


def _resolve_nu(cfg, policy: str, cohort_size: int, n_selected: int) -> float:
    if cfg.nu == "auto":
        if policy == FEDAVG_ALL:
            return 1.0 / cohort_size
        return 1.0 / max(n_selected, 1)
    return float(cfg.nu)


def _test_metrics(model: np.ndarray, test: Dataset, loss: str) -> tuple[float, float]:
    scores = test.features @ model
    preds = np.where(scores > 0.0, 1.0, -1.0)
    accuracy = float(np.mean(preds == test.labels))
    return accuracy, mean_loss(loss, model, test.features, test.labels)


def round_step(state: SimulationState, cfg) -> RoundMetrics:
    """Execute one full round and advance the state in place."""
    if state.budget.exhausted:
        raise BudgetExhausted(f"budget exhausted after round {state.round}")
    if state.round >= cfg.rounds:
        raise RuntimeError("round horizon already reached")
    t = state.round + 1
    root = RngStream(cfg.seed)
    cohort = sample_cohort(cfg.n_clients, cfg.m_fraction, t, root)
    plan = RoundPlan(round=t, cohort=cohort, quota=cfg.resolved_quota)
    hyper = Hyperparams(lam=cfg.lam, nu=1.0, local_passes=cfg.local_passes, seed=cfg.seed)

    updates = {}
    for c in cohort:
        updates[c] = local_solve(state.partitions[c], state.effective_train,
                                 state.alphas[c], state.model, cfg.loss, hyper,
                                 root.scoped(round=t, client=c, purpose="local-solve"))
    state.uploaded_bytes += len(cohort) * upload_size(state.train.d)
    deltas = {c: upd.delta_phi for c, upd in updates.items()}

    contributions: dict[int, float] = {}
    u_map = None
    residual = None
    utility_queries = utility_evaluations = 0
    if cfg.aggregation == FEDTOKEN:
        ctx = UtilityContext(state.model.phi, deltas, state.test, cfg.loss,
                             weighting=cfg.weighting,
                             nu=_resolve_nu(cfg, FEDTOKEN, len(cohort), plan.quota))
        perm_plan = PermutationPlan(delta=cfg.delta, eps=cfg.eps,
                                    stream=root.scoped(round=t, client=0,
                                                       purpose="shapley-perms"))
        u = tmc_shapley(ctx, cohort, perm_plan)
        selection = select_top_q(u, plan.quota)
        contributions = dict(u.u)
        u_map = u.u
        residual = efficiency_residual(u, ctx, cohort)
        utility_queries, utility_evaluations = ctx.queries, ctx.evaluations
    elif cfg.aggregation == FEDAVG_ALL:
        selection = SelectionResult(selected=cohort, rejected=(),
                                    flagged_non_contributing=())
    elif cfg.aggregation == RANDOM_QUOTA:
        gen = root.scoped(round=t, client=0, purpose="random-quota").generator()
        picked = gen.choice(len(cohort), size=plan.quota, replace=False)
        chosen = tuple(sorted(cohort[int(i)] for i in picked))
        rest = tuple(c for c in cohort if c not in set(chosen))
        selection = SelectionResult(selected=chosen, rejected=rest,
                                    flagged_non_contributing=())
    else:
        raise ValueError(f"unknown aggregation policy {cfg.aggregation!r}")

    nu_round = _resolve_nu(cfg, cfg.aggregation, len(cohort), len(selection.selected))
    phi_next = aggregate(state.model.phi, selection, deltas, nu_round)
    for c in selection.selected:
        state.alphas[c] = commit(state.alphas[c], updates[c].rho, nu_round)
    state.committed_bytes += len(selection.selected) * upload_size(state.train.d)
    state.model = GlobalModel(phi_next, t)
    state.round = t

    policy = AllocationPolicy(cfg.allocation_kind, cfg.zeta,
                              cfg.participation_for_selected)
    allocation, state.budget = tokenomics.settle_round(state.budget, policy,
                                                       u_map, selection, t)
    block = state.chain.append_block(t, allocation)

    accuracy, test_loss = _test_metrics(phi_next, state.test, cfg.loss)
    gap = duality_gap(state.dual_states(), state.effective_train, cfg.loss, cfg.lam)
    return RoundMetrics(
        round=t,
        policy=cfg.aggregation,
        test_accuracy=accuracy,
        test_loss=test_loss,
        duality_gap=gap,
        contributions=contributions,
        efficiency_residual=residual,
        selected=selection.selected,
        rejected=selection.rejected,
        flagged=selection.flagged_non_contributing,
        tokens_contribution=sum(allocation.contribution_awards.values()),
        tokens_participation=sum(allocation.participation_awards.values()),
        budget_remaining=state.budget.remaining,
        uploaded_bytes=state.uploaded_bytes,
        committed_bytes=state.committed_bytes,
        utility_queries=utility_queries,
        utility_evaluations=utility_evaluations,
        block_hash=block.block_hash.hex(),
    )
