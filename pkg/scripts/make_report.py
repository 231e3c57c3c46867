"""Build figures and tables from the cached acceptance experiments.

Reads .experiment_cache (fill it first with run_acceptance_experiments.py) and writes into
results/:

  learning_curves_reference.svg   success rate vs steps: full, no-ref-update, no-ref
  learning_curves_ablation.svg    success rate vs steps: full, no-curriculum, no-self-imitation
  returns_ablation.svg            evaluation task return vs steps for the same variants
  toy_suite.md                    PID baseline vs trained policy on toy-1..5
  goalgen.md                      goal-conditioned success on train and test goals
"""

from pathlib import Path

import numpy as np

from reftraj.env import load_task
from reftraj.evaluate import run_baseline
from reftraj.experiments import final_success, run_goalgen, run_variant, steps_to_success, task_file
from reftraj.goalgen import GoalGenReport
from reftraj.plots import learning_curves

ROOT = Path(__file__).resolve().parents[1]
CACHE = ROOT / ".experiment_cache"
OUT = ROOT / "results"
BUDGET = 150_000
SEEDS = range(5)
VARIANTS = {"full": (), "no-ref-update": ("no-ref-update",), "no-ref": ("no-ref",),
            "no-curriculum": ("no-curriculum",), "no-self-imitation": ("no-self-imitation",)}


def runs(name, task="toy-1"):
    return [run_variant(task, s, VARIANTS[name], BUDGET, cache_dir=CACHE) for s in SEEDS]


def main():
    OUT.mkdir(exist_ok=True)
    all_runs = {name: runs(name) for name in VARIANTS}
    curves = {name: [r["eval_rows"] for r in rs] for name, rs in all_runs.items()}
    learning_curves({k: curves[k] for k in ("full", "no-ref-update", "no-ref")},
                    OUT / "learning_curves_reference.svg", title="toy-1: reference shaping and updating")
    ablation = {k: curves[k] for k in ("full", "no-curriculum", "no-self-imitation")}
    learning_curves(ablation, OUT / "learning_curves_ablation.svg", title="toy-1: ablations")
    learning_curves(ablation, OUT / "returns_ablation.svg", key="mean_return_f", title="toy-1: evaluation return")

    lines = ["| Variant | Median steps to 90% | Mean final success |", "|---|---|---|"]
    for name, rs in all_runs.items():
        med = np.median([steps_to_success(r) for r in rs])
        lines.append(f"| {name} | {med:g} | {np.mean([final_success(r) for r in rs]):.2f} |")
    (OUT / "variants.md").write_text("\n".join(lines) + "\n")

    rows = ["| Task | PID time [s] | RL time [s] | PID max accel [rad/s^2] | RL max accel [rad/s^2] |",
            "|---|---|---|---|---|"]
    for i in range(1, 6):
        name = f"toy-{i}"
        rl = run_variant(name, 0, (), BUDGET, cache_dir=CACHE)["final_rollout"]
        base, _ = run_baseline(load_task(task_file(name)))
        pid_t = f"{base.time_to_goal:.2f}" if base.reached else "fail"
        rl_t = f"{rl['time']:.2f}" if rl["success"] else "fail"
        rows.append(f"| {name} | {pid_t} | {rl_t} | {np.max(base.max_accel):.1f} | {max(rl['max_accel']):.1f} |")
    (OUT / "toy_suite.md").write_text("\n".join(rows) + "\n")

    rep = run_goalgen("toy-1", 0, cache_dir=CACHE)["report"]
    rep.pop("overall")
    (OUT / "goalgen.md").write_text(GoalGenReport(**rep).table() + "\n")
    for f in sorted(OUT.iterdir()):
        print("wrote", f.relative_to(ROOT))


if __name__ == "__main__":
    main()
