"""Regenerate the bundled task JSON files under src/reftraj/data/tasks."""

import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "reftraj" / "data" / "tasks"

SHELF_START = [0, 8, 131, 0, 41, 180]
SHELF_GOALS = {
    "BL": [-52, 59, 106, -141, 78, 170],
    "ML": [-52, 28, 111, -134, 60, 152],
    "TL": [-52, 13, 95, -111, 42, 117],
    "BR": [-128, 59, 106, 141, 78, 190],
    "MR": [-128, 28, 111, 134, 60, 208],
    "TR": [-128, 13, 95, 111, 42, 243],
}

# Toy planar suite: every start/goal pair is separated by one of the two obstacle walls in joint space.
TOY = [
    ([-40, 60], [50, 30]),
    ([-40, -40], [50, 30]),
    ([40, 60], [140, 60]),
    ([-90, 0], [130, 30]),
    ([-60, -120], [100, 100]),
]


def shelf_task(i, name, goal):
    return {
        "name": f"bookshelf-{i}-{name}",
        "world_file": "../worlds/bookshelf.json",
        "theta_start_deg": SHELF_START,
        "theta_goal_deg": goal,
        "dt": 0.0035,
        "max_steps": 300,
        "p_reset": 0.3,
        "rrt": {"max_iterations": 50000},
        "pid": {"gains": [4.0, 0.0, 0.2], "capture_radius": 0.05, "max_steps": 20000},
        "train": {"budget": 1000000},
        # goal rectangle lies in the vertical plane of the middle-left cell, spanned by x and z
        "goal_rectangle": {"center": [0.224, -0.378, 0.372], "u": [1, 0, 0], "v": [0, 0, 1]},
    }


def toy_task(i, start, goal):
    return {
        "name": f"toy-{i}",
        "world_file": "../worlds/toy-planar.json",
        "theta_start_deg": start,
        "theta_goal_deg": goal,
        "dt": 0.02,
        "max_steps": 300,
        "p_reset": 0.3,
        "rrt": {"sample_margin": None, "step_size": 0.2},
        "pid": {"gains": [4.0, 0.0, 0.2], "capture_radius": 0.05, "max_steps": 3000},
        "train": {"budget": 150000},
        # rectangle centred on the goal's end-effector position, in the arm plane
        "goal_rectangle": {"u": [1, 0, 0], "v": [0, 1, 0]},
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    tasks = [shelf_task(i + 1, n, g) for i, (n, g) in enumerate(SHELF_GOALS.items())]
    tasks.append({
        "name": "open-computer",
        "world_file": "../worlds/open-computer.json",
        "theta_start_deg": [-47, -8, 113, 0, 75, -138],
        "theta_goal_deg": [-90, -1, 138, -180, 46, 88],
        "dt": 0.0035,
        "max_steps": 300,
        "p_reset": 0.3,
        "rrt": {"max_iterations": 50000},
        "pid": {"gains": [4.0, 0.0, 0.2], "capture_radius": 0.05, "max_steps": 20000},
        "train": {"budget": 1000000},
    })
    tasks += [toy_task(i + 1, s, g) for i, (s, g) in enumerate(TOY)]
    for t in tasks:
        (OUT / f"{t['name']}.json").write_text(json.dumps(t, indent=2) + "\n")
        print("wrote", t["name"])


if __name__ == "__main__":
    main()
