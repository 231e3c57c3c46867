"""Train every seeded run the learning-related acceptance tests need and store the summaries.

Runs are cached in .experiment_cache at the repository root (see reftraj.experiments), so the
script can be interrupted and restarted; finished runs are skipped. On one CPU core the whole
set takes a few hours.

    python3 scripts/run_acceptance_experiments.py            # everything
    python3 scripts/run_acceptance_experiments.py --only ablations
"""

import argparse
import time
from pathlib import Path

from reftraj.experiments import run_goalgen, run_variant

CACHE = Path(__file__).resolve().parents[1] / ".experiment_cache"
BUDGET = 150_000
SEEDS = range(5)


def log(msg):
    print(time.strftime("%H:%M:%S"), msg, flush=True)


def jobs(only):
    if only in (None, "ablations"):
        for abl in ((), ("no-ref",), ("no-ref-update",), ("no-curriculum",), ("no-self-imitation",)):
            for seed in SEEDS:
                yield lambda abl=abl, seed=seed: run_variant("toy-1", seed, abl, BUDGET, cache_dir=CACHE, log=log)
    if only in (None, "suite"):
        for i in range(2, 6):
            yield lambda i=i: run_variant(f"toy-{i}", 0, (), BUDGET, cache_dir=CACHE, log=log)
    if only in (None, "goalgen"):
        yield lambda: run_goalgen("toy-1", 0, cache_dir=CACHE, log=log)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--only", choices=("ablations", "suite", "goalgen"))
    args = p.parse_args()
    for job in jobs(args.only):
        job()


if __name__ == "__main__":
    main()
