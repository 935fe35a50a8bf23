"""End-to-end run driver: build state, loop rounds, emit artifacts.

A run writes four files into the output directory:

* ``metrics.jsonl``  - one JSON record per executed round plus a final
  summary record (sorted keys, so identical configs produce identical bytes)
* ``ledger.ftlg``    - the hash-chained token ledger
* ``model.bin``      - final model snapshot
* ``summary.json``   - the summary record on its own, for convenience

Sweeps re-run the same config while varying one axis, each value in its
own subdirectory, and return a comparison table.  ``FEDTOKEN_THREADS``
caps how many sweep runs execute concurrently.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ledger as ledger_mod
from . import scheduler, tokenomics
from .config import ExperimentConfig, with_overrides
from .data import Dataset, load_csv, partition, PartitionScheme, poison_labels, \
    synth_gaussian, train_test_split
from .dual import DualState, GlobalModel, save_model
from .rng import RngStream
from .scheduler import RoundMetrics, SimulationState

SWEEP_AXES = ("quota_ratio", "delta", "budget")

METRICS_FILE = "metrics.jsonl"
LEDGER_FILE = "ledger.ftlg"
MODEL_FILE = "model.bin"
SUMMARY_FILE = "summary.json"


@dataclass
class RunResult:
    config: ExperimentConfig
    metrics: list[RoundMetrics]
    summary: dict
    state: SimulationState


def _load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.data_source == "csv":
        return load_csv(cfg.csv_path, header=cfg.csv_header)
    stream = RngStream(cfg.seed, purpose="synth-data")
    return synth_gaussian(cfg.n_samples, cfg.dim, cfg.separation, stream)


def build_simulation(cfg: ExperimentConfig) -> SimulationState:
    full = _load_dataset(cfg)
    train, test = train_test_split(full, cfg.test_fraction,
                                   RngStream(cfg.seed, purpose="train-test-split"))
    scheme = PartitionScheme(kind=cfg.partition_scheme, seed=cfg.seed,
                             shards_k=cfg.shards_k, dirichlet_beta=cfg.dirichlet_beta)
    parts = partition(train, cfg.n_clients, scheme)
    effective = train
    for c in cfg.poison_clients:
        effective = poison_labels(parts[c], effective, cfg.flip_fraction,
                                  RngStream(cfg.seed, client=c, purpose="poison"))
    budget = tokenomics.Budget(
        total_microtokens=cfg.total_microtokens,
        per_round_microtokens=cfg.resolved_per_round_microtokens,
        participation_base_microtokens=cfg.resolved_participation_base,
        remaining=cfg.total_microtokens,
    )
    return SimulationState(
        train=train,
        effective_train=effective,
        test=test,
        partitions=parts,
        model=GlobalModel(np.zeros(train.d), 0),
        alphas={c: DualState(c) for c in range(cfg.n_clients)},
        budget=budget,
        chain=ledger_mod.Chain(),
    )


def _summary(cfg: ExperimentConfig, metrics: list[RoundMetrics],
             state: SimulationState, stop_reason: str) -> dict:
    rounds_to_target = None
    for m in metrics:
        if m.test_accuracy >= cfg.target_accuracy:
            rounds_to_target = m.round
            break
    last = metrics[-1] if metrics else None
    return {
        "record": "summary",
        "policy": cfg.aggregation,
        "seed": cfg.seed,
        "rounds_executed": len(metrics),
        "stop_reason": stop_reason,
        "target_accuracy": cfg.target_accuracy,
        "rounds_to_target_accuracy": rounds_to_target,
        "final_test_accuracy": last.test_accuracy if last else None,
        "final_test_loss": last.test_loss if last else None,
        "final_duality_gap": last.duality_gap if last else None,
        "uploaded_bytes": state.uploaded_bytes,
        "committed_bytes": state.committed_bytes,
        "tokens_issued_microtokens": state.chain.total_issued(),
        "budget_remaining_microtokens": state.budget.remaining,
    }


def run(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> RunResult:
    """Execute rounds until the horizon or the budget-exhausted signal."""
    state = build_simulation(cfg)
    out = Path(out_dir) if out_dir is not None else None
    metrics_fh = None
    ledger_path = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(out / METRICS_FILE, "w", encoding="utf-8", newline="\n")
        ledger_path = out / LEDGER_FILE

    metrics: list[RoundMetrics] = []
    stop_reason = "horizon"
    try:
        for _ in range(cfg.rounds):
            m = scheduler.round_step(state, cfg)
            metrics.append(m)
            if metrics_fh is not None:
                metrics_fh.write(json.dumps(m.to_record(), sort_keys=True) + "\n")
                metrics_fh.flush()
            if ledger_path is not None:
                ledger_mod.append_to_file(ledger_path, state.chain,
                                          state.chain.blocks[-1])
            if state.budget.exhausted:
                stop_reason = "budget-exhausted"
                break
        summary = _summary(cfg, metrics, state, stop_reason)
        if metrics_fh is not None:
            metrics_fh.write(json.dumps(summary, sort_keys=True) + "\n")
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    if out is not None:
        save_model(out / MODEL_FILE, state.model.phi)
        (out / SUMMARY_FILE).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n",
                                        encoding="utf-8")
    return RunResult(config=cfg, metrics=metrics, summary=summary, state=state)


def _apply_axis(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis == "quota_ratio":
        return with_overrides(cfg, quota=None, quota_ratio=float(value))
    if axis == "delta":
        return with_overrides(cfg, delta=int(value))
    if axis == "budget":
        return with_overrides(cfg, total_tokens=int(value), per_round_microtokens=None)
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def max_threads() -> int:
    raw = os.environ.get("FEDTOKEN_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def sweep(cfg: ExperimentConfig, axis: str, values, out_dir: str | Path | None = None) -> list[dict]:
    """One run per axis value under a shared seed schedule; returns table rows."""
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    configs = [_apply_axis(cfg, axis, v) for v in values]
    out = Path(out_dir) if out_dir is not None else None

    def _one(i: int) -> RunResult:
        sub = out / f"{axis}-{values[i]}" if out is not None else None
        return run(configs[i], sub)

    workers = min(max_threads(), len(values))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_one, range(len(values))))
    else:
        results = [_one(i) for i in range(len(values))]

    rows = []
    for value, res in zip(values, results):
        total_queries = sum(m.utility_queries for m in res.metrics)
        rows.append({
            "axis": axis,
            "value": value,
            "rounds_executed": res.summary["rounds_executed"],
            "rounds_to_target_accuracy": res.summary["rounds_to_target_accuracy"],
            "final_test_accuracy": res.summary["final_test_accuracy"],
            "tokens_issued_microtokens": res.summary["tokens_issued_microtokens"],
            "uploaded_bytes": res.summary["uploaded_bytes"],
            "committed_bytes": res.summary["committed_bytes"],
            "utility_queries": total_queries,
        })
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        text = "\n".join(json.dumps(r, sort_keys=True) for r in rows) + "\n"
        (out / "sweep.jsonl").write_text(text, encoding="utf-8")
    return rows


def read_metrics(path: str | Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def missing_contributions(records: list[dict], chain, client_id: int) -> list[int]:
    """Rounds where the client sat in the cohort but earned zero tokens.

    Joins the metrics stream (cohort membership) with the ledger (who was
    actually paid); the chain alone cannot answer this, since unpaid
    clients leave no transactions.
    """
    rounds = []
    for rec in records:
        if rec.get("record") != "round":
            continue
        cohort = set(rec["selected"]) | set(rec["rejected"]) | set(rec["flagged"])
        if client_id not in cohort:
            continue
        paid = any(tx.client_id == client_id and tx.amount_microtokens > 0
                   for tx in chain.query_round(rec["round"]))
        if not paid:
            rounds.append(rec["round"])
    return rounds


DEFAULT_REPORT_COLUMNS = ("round", "test_accuracy", "test_loss", "duality_gap",
                          "tokens_contribution", "tokens_participation",
                          "budget_remaining")


def render_table(records: list[dict], columns=DEFAULT_REPORT_COLUMNS,
                 gnuplot: bool = False) -> str:
    """Plain-text table of per-round records; gnuplot mode emits bare columns."""
    rows = [r for r in records if r.get("record") == "round"]

    def cell(r, c):
        v = r.get(c)
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)

    if gnuplot:
        lines = ["# " + " ".join(columns)]
        lines += [" ".join(cell(r, c) for c in columns) for r in rows]
        return "\n".join(lines) + "\n"
    widths = [max(len(c), *(len(cell(r, c)) for r in rows)) if rows else len(c)
              for c in columns]
    header = "  ".join(c.ljust(w) for c, w in zip(columns, widths))
    sep = "  ".join("-" * w for w in widths)
    body = ["  ".join(cell(r, c).ljust(w) for c, w in zip(columns, widths)) for r in rows]
    return "\n".join([header, sep, *body]) + "\n"
