from dataclasses import replace

import pytest

from twinforge.bench import (
    BenchConfig,
    ExpertPolicy,
    ExpertStepPolicy,
    grasp_report,
    grasp_successes,
    grasp_suite,
    rollout_seed,
    run_benchmark,
)
from twinforge.randomization import RandomizationConfig
from twinforge.scene import aabb, check_support


@pytest.fixture(scope="module")
def tasks(lib):
    return lib.benchmark_tasks()


def bench(lib, aloha, pools, tasks, **kw):
    kw.setdefault("rollouts_per_task", 20)
    return run_benchmark(tasks, lib, aloha, ExpertPolicy(), BenchConfig(**kw), pools)


def test_expert_is_perfect_on_easy(lib, aloha, pools, tasks):
    res = bench(lib, aloha, pools, tasks)
    assert res.successes == {t: 20 for t in tasks} and res.mean == 1


def test_hard_never_beats_easy(lib, aloha, pools, tasks):
    easy, hard = bench(lib, aloha, pools, tasks), bench(lib, aloha, pools, tasks, mode="hard")
    for t in tasks:
        assert easy.rates[t] >= hard.rates[t]


def test_hard_without_randomization_is_easy(lib, aloha, pools, tasks):
    off = bench(lib, aloha, pools, tasks, mode="hard", randomization=RandomizationConfig.all_off())
    assert off.successes == bench(lib, aloha, pools, tasks).successes


def test_reruns_and_workers_agree(lib, aloha, pools, tasks):
    a = bench(lib, aloha, pools, tasks, mode="hard", seed=5)
    b = bench(lib, aloha, pools, tasks, mode="hard", seed=5)
    c = bench(lib, aloha, pools, tasks, mode="hard", seed=5, workers=4)
    assert a == b == c


def test_rollout_seeds_are_distinct():
    seeds = {rollout_seed(0, "place_shoe", r) for r in range(1000)}
    assert len(seeds) == 1000
    assert rollout_seed(0, "place_shoe", 0) != rollout_seed(0, "lift_far_block", 0)


def test_explicit_seeds(lib, aloha, pools):
    cfg = BenchConfig(mode="hard", rollouts_per_task=3)
    a = run_benchmark(["place_shoe"], lib, aloha, ExpertPolicy(), cfg, pools, seeds=[1, 2, 3])
    b = run_benchmark(["place_shoe"], lib, aloha, ExpertPolicy(), cfg, pools, seeds=[1, 2, 3])
    assert a == b


def test_step_policy_matches_program_policy(lib, aloha, pools, tasks):
    cfg = BenchConfig(mode="hard", rollouts_per_task=15)
    whole = run_benchmark(tasks, lib, aloha, ExpertPolicy(), cfg, pools)
    stepwise = run_benchmark(tasks, lib, aloha, ExpertStepPolicy(lib), cfg, pools)
    assert whole == stepwise


def test_crashing_policy_scores_zero(lib, aloha, pools):
    class Crash:
        def program(self, task, scene, instruction):
            raise RuntimeError("policy bug")

    res = run_benchmark(["place_shoe"], lib, aloha, Crash(), BenchConfig(rollouts_per_task=4), pools)
    assert res.successes == {"place_shoe": 0}


def test_invalid_program_scores_zero(lib, aloha, pools):
    class Wrong:
        def program(self, task, scene, instruction):
            return "task t\ngrasp(left, mug)\n"

    res = run_benchmark(["place_shoe"], lib, aloha, Wrong(), BenchConfig(rollouts_per_task=2), pools)
    assert res.successes == {"place_shoe": 0}


def test_report_formats(lib, aloha, pools):
    res = bench(lib, aloha, pools, ["place_shoe"], rollouts_per_task=4)
    assert res.to_json()["tasks"]["place_shoe"] == {"successes": 4, "rate": "100.0%"}
    assert res.to_text().splitlines()[1].split() == ["place_shoe", "4/4", "100.0%"]


def test_config_validation():
    with pytest.raises(ValueError):
        BenchConfig(mode="medium")
    with pytest.raises(ValueError):
        BenchConfig(rollouts_per_task=0)


# --- grasp suite ---------------------------------------------------------------------------

def test_suite_scenes_are_physically_sound(lib):
    ext, scenes = grasp_suite(lib, n=40, seed=1)
    for scene in scenes:
        assert check_support(scene, ext) == []
        boxes = [aabb(o, ext.asset(o.asset_id)) for o in scene.objects]
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                (alo, ahi), (blo, bhi) = boxes[i], boxes[j]
                assert not all(alo[k] <= bhi[k] and blo[k] <= ahi[k] for k in range(3))


def test_suite_is_seeded(lib):
    assert grasp_suite(lib, n=10, seed=2)[1] == grasp_suite(lib, n=10, seed=2)[1]
    assert grasp_suite(lib, n=10, seed=2)[1] != grasp_suite(lib, n=10, seed=3)[1]


def test_adaptation_helps_side_only_arms(lib):
    report = grasp_report(lib, n=60)
    piper, franka = report["piper"], report["franka"]
    assert piper["superset"] and piper["K8"] > piper["K0"]
    assert franka["superset"] and franka["K8"] >= franka["K0"]


def test_zero_perturbations_is_a_subset_on_any_profile(lib):
    ext, scenes = grasp_suite(lib, n=30, seed=4)
    for name, emb in ext.embodiments.items():
        assert grasp_successes(scenes, ext, emb, 0) <= grasp_successes(scenes, ext, emb, 8), name


def test_suite_needs_targets(lib):
    bare = replace(lib, assets={k: v for k, v in lib.assets.items() if v.category not in ("bottle", "can")})
    with pytest.raises(ValueError):
        grasp_suite(bare, n=1)
