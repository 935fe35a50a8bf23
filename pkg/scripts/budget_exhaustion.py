#!/usr/bin/env python3
"""Budget-exhaustion study: fixed total budget, varying quota.

With the total budget pinned, a larger quota spends participation and
contribution tokens on more clients per round; the run halts on the
exhausted signal.  The table relates quota to rounds survived and the
accuracy reached when the tokens run out.

Usage:
    python scripts/budget_exhaustion.py [--budget 1000] [--quotas 2,4,6,8,10]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fedtoken.config import ExperimentConfig, validate
from fedtoken.harness import run


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--budget", type=int, default=1000, help="total tokens")
    parser.add_argument("--quotas", default="2,4,6,8,10")
    parser.add_argument("--seed", type=int, default=11)
    args = parser.parse_args()

    print(f"{'quota':>6} {'rounds':>7} {'stop':>18} {'final_acc':>10} "
          f"{'tokens_spent':>13} {'committed_bytes':>16}")
    for quota in (int(q) for q in args.quotas.split(",")):
        cfg = validate(ExperimentConfig(
            seed=args.seed, n_clients=10, m_fraction=1.0, quota=quota,
            rounds=60, n_samples=400, dim=5, separation=2.0, lam=0.02,
            loss="logistic", delta=4, eps=0.0,
            total_tokens=args.budget, per_round_microtokens=50 * 10**6,
            partition_scheme="iid", target_accuracy=0.7,
        ))
        res = run(cfg)
        spent = res.summary["tokens_issued_microtokens"]
        print(f"{quota:>6} {res.summary['rounds_executed']:>7} "
              f"{res.summary['stop_reason']:>18} "
              f"{res.summary['final_test_accuracy']:>10.3f} "
              f"{spent:>13} {res.summary['committed_bytes']:>16}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
