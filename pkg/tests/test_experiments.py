import math

import numpy as np

from reftraj.experiments import final_success, late_return, run_key, run_variant, steps_to_success


def summary(evals, episodes, budget=1000):
    return {"budget": budget, "eval_rows": [{"total_steps": s, "success_rate": r} for s, r in evals],
            "episodes": episodes}


def test_steps_to_success_first_crossing():
    s = summary([(100, 0.2), (200, 0.9), (300, 0.5), (400, 1.0)], [])
    assert steps_to_success(s, 0.9) == 200
    assert steps_to_success(s, 0.95) == 400
    assert math.isinf(steps_to_success(summary([(100, 0.1)], []), 0.9))


def test_final_success_uses_last_evaluation():
    assert final_success(summary([(100, 1.0), (200, 0.3)], [])) == 0.3
    assert final_success(summary([], [])) == 0.0


def test_late_return_window():
    eps = [[850, -10.0, 0, 0], [905, -2.0, 1, 0], [1000, -4.0, 1, 0]]
    assert late_return(summary([], eps), 0.1) == -3.0
    assert math.isnan(late_return(summary([], eps[:1]), 0.1))


def test_run_key_depends_on_settings():
    a = {"task": "toy-1", "seed": 0, "ablations": [], "budget": 10, "stop": None}
    assert run_key(a) == run_key(dict(a))
    assert run_key(a) != run_key(dict(a, seed=1))


def test_run_variant_caches(tmp_path):
    first = run_variant("toy-1", 0, (), budget=400, cache_dir=tmp_path)
    files = list(tmp_path.iterdir())
    assert len(files) == 1
    again = run_variant("toy-1", 0, (), budget=400, cache_dir=tmp_path)
    assert again == first
    assert first["total_steps"] >= 400
    assert set(first["final_rollout"]) == {"success", "steps", "time", "max_accel"}
    assert np.isfinite(first["final_rollout"]["max_accel"]).all()
