import json
from dataclasses import replace

import pytest

from twinforge.dsl import parse_program
from twinforge.scene import ObjectInstance, Pose, Scene, build_scene, resting_pose
from twinforge.seeding import mix64
from twinforge.sim import FailureCause, SimConfig, TrialRunner, TrialLog, run_batch, run_trial, snapshot, trace_trial


def expert(task):
    return parse_program(task.expert_program)


@pytest.fixture(scope="module")
def shoe(lib):
    task = lib.tasks["place_shoe"]
    return task, build_scene(task, lib)


def test_expert_place_shoe_succeeds(lib, aloha, shoe):
    task, scene = shoe
    log = run_trial(expert(task), scene, lib, aloha, seed=1, checker=task.checker)
    assert log.success and log.failure_cause is None and log.failing_step is None
    assert [s.skill for s in log.steps] == ["grasp", "move_by", "place", "open"]


def test_unknown_object_is_unexecutable(lib, aloha, shoe):
    task, scene = shoe
    log = run_trial(parse_program("task t\ngrasp(left, mug)\n"), scene, lib, aloha, seed=0)
    assert (log.success, log.failure_cause, log.failing_step) == (False, FailureCause.UNEXECUTABLE, 0)
    assert log.steps[0].skill == "VALIDATE"


def test_out_of_reach_grasp_names_the_arm(lib, aloha):
    asset = lib.asset("shoe_0")
    far = Scene(task_objects=(ObjectInstance("shoe", "shoe_0", resting_pose(asset, 10.0, 0.0, 0.75)),))
    for arm, cause in (("left", FailureCause.LEFT_GRASP_FAILURE), ("right", FailureCause.RIGHT_GRASP_FAILURE)):
        log = run_trial(parse_program(f"task t\ngrasp({arm}, shoe)\n"), far, lib, aloha, seed=0)
        assert log.failure_cause is cause and log.failing_step == 0
        assert log.steps[0].resolved_args["reasons"] == {"reach": log.steps[0].resolved_args["attempted"]}


def test_same_seed_gives_identical_bytes(lib, aloha, shoe):
    task, scene = shoe
    a = run_trial(expert(task), scene, lib, aloha, seed=42, checker=task.checker)
    b = run_trial(expert(task), scene, lib, aloha, seed=42, checker=task.checker)
    assert a.dumps() == b.dumps()
    c = run_trial(expert(task), scene, lib, aloha, seed=43, checker=task.checker)
    assert c.dumps() != a.dumps()


def test_lift_far_block_seven_of_ten(lib, aloha):
    task = lib.tasks["lift_far_block"]
    logs = run_batch(expert(task), build_scene(task, lib), lib, aloha, run_seed=0, M=10, checker=task.checker)
    assert [int(lg.success) for lg in logs] == [1, 1, 0, 1, 1, 1, 1, 0, 1, 0]
    assert {lg.failure_cause for lg in logs if not lg.success} == {FailureCause.RIGHT_GRASP_FAILURE}


def test_single_trial_batch_matches_run_trial(lib, aloha, shoe):
    task, scene = shoe
    (only,) = run_batch(expert(task), scene, lib, aloha, run_seed=9, M=1, checker=task.checker)
    assert only == run_trial(expert(task), scene, lib, aloha, seed=mix64(9, 0), checker=task.checker)


@pytest.mark.parametrize("workers", [2, 4, 16])
def test_batch_is_worker_independent(lib, aloha, workers):
    task = lib.tasks["lift_far_block"]
    scene = build_scene(task, lib)
    serial = run_batch(expert(task), scene, lib, aloha, run_seed=3, M=12, checker=task.checker)
    parallel = run_batch(expert(task), scene, lib, aloha, run_seed=3, M=12, checker=task.checker, workers=workers)
    assert [lg.dumps() for lg in parallel] == [lg.dumps() for lg in serial]


def test_batch_rejects_zero_trials(lib, aloha, shoe):
    with pytest.raises(ValueError):
        run_batch(expert(shoe[0]), shoe[1], lib, aloha, M=0)


def test_lift_moves_the_held_object(lib, aloha, shoe):
    task, scene = shoe
    runner = TrialRunner(scene, lib, aloha, seed=5)
    prog = parse_program("task t\narm a = arm_for(shoe)\ngrasp(a, shoe)\nmove_by(a, dz=0.07)\n")
    z0 = runner.state.objects["shoe"].pose.position[2]
    recs = [runner.execute(s) for s in prog.statements]
    assert recs[0] is None and all(r.outcome == "OK" for r in recs[1:])
    assert runner.state.objects["shoe"].pose.position[2] - z0 == pytest.approx(0.07, abs=1e-12)
    assert [k for k, _ in recs[2].world_delta] == ["shoe"]


def test_floating_target_is_incorrect_placement(lib, aloha, shoe):
    task, scene = shoe
    block = lib.asset("block_0")
    top = block.functional_points[0]
    lifted = replace(block, functional_points=(top.translated((0, 0, 0.05)),) + block.functional_points[1:])
    lib2 = replace(lib, assets={**lib.assets, "block_0": lifted})
    log = run_trial(expert(task), scene, lib2, aloha, seed=1, checker=task.checker)
    assert log.failure_cause is FailureCause.INCORRECT_PLACEMENT
    assert log.steps[log.failing_step].skill == "place"


def test_open_with_empty_gripper(lib, aloha, shoe):
    runner = TrialRunner(shoe[1], lib, aloha, seed=0)
    rec = runner.execute(parse_program("task t\nopen(left)\n").statements[0])
    assert rec.outcome == "OK" and rec.world_delta == ()


def test_failed_step_leaves_world_untouched(lib, aloha, shoe):
    runner = TrialRunner(shoe[1], lib, aloha, seed=0)
    before = runner.snapshot()
    rec = runner.execute(parse_program("task t\nmove_by(left, dx=3.0)\n").statements[0])
    assert rec.outcome == "FAIL" and rec.cause is FailureCause.UNREACHABLE
    assert runner.snapshot().split("\n")[1:] == before.split("\n")[1:]
    assert runner.execute(parse_program("task t\nopen(left)\n").statements[0]) is None


def test_checker_failure_blames_the_last_step(lib, aloha, shoe):
    task, scene = shoe
    log = run_trial(parse_program("task t\nopen(left)\nclose(left)\n"), scene, lib, aloha, checker=task.checker)
    assert (log.failure_cause, log.failing_step) == (FailureCause.INCORRECT_PLACEMENT, 1)


def test_together_conflict_at_runtime(lib, aloha):
    task = lib.tasks["pick_dual_bottles"]
    prog = parse_program("task t\narm a = arm_for(bottle_a)\narm b = arm_for(bottle_a)\n"
                         "together { open(a)\n| open(b)\n}\n")
    log = run_trial(prog, build_scene(task, lib), lib, aloha)
    assert log.failure_cause is FailureCause.COLLISION


def test_step_budget(lib, aloha, shoe):
    prog = parse_program("task t\n" + "open(left)\n" * 5)
    log = run_trial(prog, shoe[1], lib, aloha, SimConfig(max_steps=3))
    assert log.failure_cause is FailureCause.STEP_BUDGET_EXCEEDED and log.failing_step == 3


def test_trial_log_json_round_trip(lib, aloha, shoe):
    task, scene = shoe
    log = run_trial(expert(task), scene, lib, aloha, seed=11, checker=task.checker)
    assert TrialLog.from_json(json.loads(log.dumps())).dumps() == log.dumps()


# --- snapshots ------------------------------------------------------------------------

def test_empty_scene_snapshot():
    assert snapshot(Scene(), 0) == "snapshot step=0\ntable_height=0.750000\n"


def test_one_object_snapshot():
    scene = Scene(task_objects=(ObjectInstance("shoe", "shoe_0", Pose((0.0, 0.0, 0.04))),))
    line = snapshot(scene, 0).splitlines()[2]
    assert line.startswith("shoe pos=(0.000000,0.000000,0.040000) ")


def test_traced_snapshots_repeat(lib, aloha, shoe):
    task, scene = shoe
    log_a, shots_a = trace_trial(expert(task), scene, lib, aloha, seed=2, checker=task.checker)
    log_b, shots_b = trace_trial(expert(task), scene, lib, aloha, seed=2, checker=task.checker)
    assert shots_a == shots_b and len(shots_a) == len(log_a.steps) + 1
    assert shots_a[-1].startswith(f"snapshot step={len(log_a.steps)}\n")
    assert "holding=shoe" in shots_a[1]
