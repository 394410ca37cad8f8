"""End-to-end acceptance checks, one or more tests per numbered criterion.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary lists a
PASS/FAIL line per criterion.
"""

import hashlib
import json
import math
import random
import re
import statistics
import time
from fractions import Fraction
from pathlib import Path

import pytest

from twinforge.agents import ScriptedBackend
from twinforge.bench import BenchConfig, ExpertPolicy, grasp_report, run_benchmark
from twinforge.cli import main
from twinforge.dataset import export_episodes, generate_episodes
from twinforge.dsl import ParseError, parse_program, render_program
from twinforge.metrics import compute_metrics, observer_eval_from_counts, percent, runs_from_rates
from twinforge.orchestrator import LoopConfig, Terminal, run_refinement_loop
from twinforge.randomization import (
    PLACEHOLDER,
    RandomizationConfig,
    SlotBinding,
    bind_scene,
    compose_instruction,
    enumerate_instruction_count,
    perturb_camera,
    randomize_scene,
    sample_lighting,
    sample_table_height,
    sample_textures,
    synthesize_instruction,
)
from twinforge.scene import DEFAULT_CAMERA, DEFAULT_TABLE_HEIGHT, aabb, build_scene, check_support
from twinforge.sim import run_batch

from progs import ALPHABET, random_program
from test_metrics import MM_FB, VANILLA

criterion = pytest.mark.criterion


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def fenced(text):
    return f"```\n{text}```"


# --- 1 ----------------------------------------------------------------------------------

@criterion(1, "ASR columns reproduce 71.3% and 47.4%")
def test_metric_reproduction():
    with Clock() as clock:
        shown = []
        for rates in (MM_FB, VANILLA):
            runs = {f"task_{i}": runs_from_rates(f"task_{i}", [n], 100) for i, n in enumerate(rates)}
            shown.append(percent(compute_metrics(runs).ASR))
    assert shown == ["71.3%", "47.4%"]
    assert clock.seconds < 1.0


# --- 2 ----------------------------------------------------------------------------------

@criterion(2, "observer statistics from confusion counts")
def test_observer_eval_reproduction():
    with Clock() as clock:
        j = observer_eval_from_counts(TP=16, FP=61, TN=40, FN=13, localized=12).to_json()
    assert (j["accuracy"], j["precision"], j["recall"], j["f1"]) == ("0.431", "0.208", "0.552", "0.302")
    assert j["localization_accuracy"] == "30.0%" and (j["localized"], j["localization_total"]) == (12, 40)
    assert clock.seconds < 1.0


# --- 3 ----------------------------------------------------------------------------------

def brute_force_contribution(successes, cfg):
    need = math.ceil(Fraction(str(cfg.tau)) * cfg.M)
    for i, s in enumerate(successes, 1):
        if s >= need:
            return i
    return 1 + cfg.max_refinements


def adversary(rng, task):
    """A backend that never writes a passing program, drawn from five failure styles."""
    style = rng.random()
    if style < 0.25:
        return ScriptedBackend([])  # refuses every time
    if style < 0.5:
        return ScriptedBackend(["".join(rng.choices(ALPHABET, k=rng.randint(0, 120))) for _ in range(6)])
    if style < 0.75:
        return ScriptedBackend([fenced(f"task {task}\ngrasp(left, ghost_{k})\n") for k in range(6)])
    if style < 0.9:
        return ScriptedBackend([fenced(f"task {task}\nmove_by(left, dz=5.0)\n")] * 6)  # runs, fails in sim
    return ScriptedBackend([fenced(f"task {task}\nopen(left)\nclose(right)\n")] * 6)  # runs, fails the check


@criterion(3, "termination bound over 10,000 adversarial runs")
def test_termination_bound(lib, aloha):
    rng = random.Random(3)
    names = sorted(lib.tasks)
    bases = {n: build_scene(lib.tasks[n], lib) for n in names}
    worst = 0
    with Clock() as clock:
        for i in range(10_000):
            name = names[i % len(names)]
            cfg = LoopConfig(M=rng.randint(1, 10), tau=rng.choice((0.3, 0.5, 0.7, 1.0)), run_seed=i)
            run = run_refinement_loop(lib.tasks[name], lib, aloha, adversary(rng, name), cfg=cfg,
                                      scene=bases[name])
            n = len(run.iterations)
            worst = max(worst, n)
            assert n <= 6
            assert run.terminal is Terminal.BUDGET_EXHAUSTED
            assert run.cr_iter_contribution == brute_force_contribution([r.successes for r in run.iterations], cfg)
    assert worst == 6
    assert clock.seconds < 60.0, f"{clock.seconds:.1f} s"


# --- 4 ----------------------------------------------------------------------------------

BROKEN = ["```\ntask place_shoe\ngrasp(left shoe)\n```", "```\ntask place_shoe\ngrasp(left, mug)\n```",
          "```\ntask place_shoe\narm a = arm_for(shoe)\ngrasp(a, shoe)\nopen(a)\n```"]


def fix_at(task, k):
    return ScriptedBackend([BROKEN[i % 3] for i in range(k - 1)] + [fenced(task.expert_program)])


@criterion(4, "scripted fix at iteration k terminates at k; CR-Iter 3.5")
def test_loop_fix_scenarios(lib, aloha):
    task = lib.tasks["place_shoe"]
    cfg = LoopConfig(M=10, tau=0.5)
    runs = [run_refinement_loop(task, lib, aloha, fix_at(task, k), cfg=cfg) for k in range(1, 7)]
    for k, run in enumerate(runs, 1):
        assert run.terminal is Terminal.SUCCEEDED and len(run.iterations) == k
    assert Fraction(sum(r.cr_iter_contribution for r in runs), 6) == Fraction(7, 2)


# --- 5 ----------------------------------------------------------------------------------

WORKERS = (1, 4, 16)
REPS = 100


def tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode() + b"\0" + p.read_bytes())
    return h.hexdigest()


@criterion(5, "determinism across reruns and worker counts")
def test_determinism_trial_logs(lib, aloha):
    task = lib.tasks["lift_far_block"]
    prog = parse_program(task.expert_program)
    base = build_scene(task, lib)
    for r in range(REPS):
        scene = randomize_scene(base, lib, RandomizationConfig(), r)
        outs = {"".join(lg.dumps() for lg in run_batch(prog, scene, lib, aloha, run_seed=r, M=10,
                                                       checker=task.checker, workers=w))
                for w in WORKERS + (1,)}
        assert len(outs) == 1, f"repetition {r}"


@criterion(5, "determinism across reruns and worker counts")
def test_determinism_refinement_runs(lib, aloha, tmp_path):
    task = lib.tasks["place_shoe"]
    for r in range(REPS):
        digests = set()
        for n, w in enumerate(WORKERS + (1,)):
            d = tmp_path / f"{r}_{n}"
            run_refinement_loop(task, lib, aloha, fix_at(task, 1 + r % 3), cfg=LoopConfig(run_seed=r), run_dir=d,
                                workers=w)
            digests.add(tree_digest(d))
        assert len(digests) == 1, f"repetition {r}"


@criterion(5, "determinism across reruns and worker counts")
def test_determinism_dataset_shards(lib, aloha, pools, tmp_path):
    task = lib.tasks["pick_dual_bottles"]
    for r in range(REPS):
        digests = set()
        for n in range(2):
            d = tmp_path / f"{r}_{n}"
            export_episodes(generate_episodes(task, lib, aloha, pools, 4, mode="hard", seed=r), d, shard_size=3)
            digests.add(tree_digest(d))
        assert len(digests) == 1, f"repetition {r}"


@criterion(5, "determinism across reruns and worker counts")
def test_determinism_bench_rates(lib, aloha, pools):
    tasks = lib.benchmark_tasks()
    for r in range(REPS):
        outs = {json.dumps(run_benchmark(tasks, lib, aloha, ExpertPolicy(),
                                         BenchConfig(mode="hard", rollouts_per_task=4, seed=r, workers=w),
                                         pools).to_json())
                for w in WORKERS + (1,)}
        assert len(outs) == 1, f"repetition {r}"


# --- 6 ----------------------------------------------------------------------------------

@criterion(6, "1,000 Hard scenes: no overlap, support or category violations")
def test_clutter_safety(lib):
    names = lib.benchmark_tasks()
    bases = {n: build_scene(lib.tasks[n], lib) for n in names}
    overlaps = support = category = 0
    with Clock() as clock:
        for s in range(1000):
            base = bases[names[s % len(names)]]
            scene = randomize_scene(base, lib, RandomizationConfig(), s)
            boxes = [aabb(o, lib.asset(o.asset_id)) for o in scene.objects]
            for i in range(len(boxes)):
                for j in range(i + 1, len(boxes)):
                    (alo, ahi), (blo, bhi) = boxes[i], boxes[j]
                    overlaps += all(alo[k] <= bhi[k] and blo[k] <= ahi[k] for k in range(3))
            support += len(check_support(scene, lib))
            banned = {lib.asset(o.asset_id).category for o in scene.task_objects}
            category += sum(lib.asset(o.asset_id).category in banned for o in scene.distractors)
    assert (overlaps, support, category) == (0, 0, 0)
    assert clock.seconds < 60.0


# --- 7 ----------------------------------------------------------------------------------

def near_midpoint(samples, lo, hi):
    se = statistics.stdev(samples) / math.sqrt(len(samples))
    return abs(statistics.fmean(samples) - (lo + hi) / 2) <= 3 * se


@criterion(7, "randomization bounds and per-axis uniformity")
def test_randomization_bounds(lib):
    cfg = RandomizationConfig()
    n = 10_000
    heights = [sample_table_height(cfg, s) - DEFAULT_TABLE_HEIGHT for s in range(n)]
    assert max(abs(h) for h in heights) <= 0.03
    assert near_midpoint(heights, -0.03, 0.03)

    cams = [perturb_camera(DEFAULT_CAMERA, cfg, s) for s in range(n)]
    shifts = [tuple(a - b for a, b in zip(c.position, DEFAULT_CAMERA.position)) for c in cams]
    assert max(math.hypot(*d) for d in shifts) <= 0.01 + 1e-12
    for axis in range(3):
        assert near_midpoint([d[axis] for d in shifts], -0.01, 0.01), axis
    turns = [2 * math.acos(min(1.0, abs(sum(a * b for a, b in zip(c.orientation, DEFAULT_CAMERA.orientation)))))
             for c in cams]
    limit = math.radians(cfg.camera_rotation_max_deg)
    assert max(turns) <= limit + 1e-9
    assert near_midpoint(turns, 0.0, limit)

    b = cfg.lighting_bounds
    lights = [sample_lighting(cfg, s) for s in range(n)]
    assert all(b.contains(x) for x in lights)
    assert near_midpoint([x.color_temperature for x in lights], *b.color_temperature)
    assert near_midpoint([x.intensity for x in lights], *b.intensity)
    for axis in range(3):
        assert near_midpoint([x.position[axis] for x in lights], b.position_lo[axis], b.position_hi[axis])
    assert near_midpoint([b.types.index(x.type) for x in lights], 0, len(b.types) - 1)

    surfaces = sorted(t.texture_id for t in lib.textures if t.tag == "surface")
    picks = [surfaces.index(sample_textures(lib, cfg, s)[0]) for s in range(n)]
    assert near_midpoint(picks, 0, len(surfaces) - 1)


# --- 8 ----------------------------------------------------------------------------------

@criterion(8, "instruction counts, split disjointness and the worked example")
def test_instruction_combinatorics(lib, pools):
    assert enumerate_instruction_count(50, [12]) == 600

    eval_templates, eval_descriptions = pools.eval_strings()
    patterns = []
    for tp in pools.tasks.values():
        for i in tp.eval:
            parts = PLACEHOLDER.split(tp.templates[i])
            patterns.append(re.compile("".join(re.escape(p) if k % 2 == 0 else ".+" for k, p in enumerate(parts))))
    names = lib.benchmark_tasks()
    for s in range(1000):
        task = lib.tasks[names[s % len(names)]]
        scene = randomize_scene(build_scene(task, lib), lib, RandomizationConfig(), s)
        ins = compose_instruction(pools.tasks[task.task_name], pools, bind_scene(task, scene), s, "train")
        assert not any(p.fullmatch(ins.text) for p in patterns), ins.text
        assert not any(d in ins.text for d in eval_descriptions), ins.text
        assert ins.text not in eval_templates

    bindings = {"A": SlotBinding(description="sauce can", arm="left"), "B": SlotBinding(description="gray kitchenpot")}
    assert (synthesize_instruction("Use {a} to place {A} to the left of {B}", None, bindings, 0)
            == "Use left arm to place sauce can to the left of gray kitchenpot")


# --- 9 ----------------------------------------------------------------------------------

@criterion(9, "grasp adaptation: K=8 successes contain K=0, gain on side-only arm")
def test_grasp_monotonicity(lib):
    with Clock() as clock:
        report = grasp_report(lib, ("piper", "franka"), n=200, seed=0, K=8)
    piper, franka = report["piper"], report["franka"]
    assert piper["superset"] and franka["superset"]
    assert piper["K8"] > piper["K0"]
    assert franka["K8"] >= franka["K0"]
    assert clock.seconds < 60.0


# --- 10 ---------------------------------------------------------------------------------

@criterion(10, "DSL round trip over 10,000 programs; parser total on 1,000,000 fuzz inputs")
def test_dsl_round_trip():
    rng = random.Random(10)
    for _ in range(10_000):
        prog = random_program(rng)
        text = render_program(prog)
        assert parse_program(text) == prog
        assert render_program(parse_program(text)) == text


def mutate(rng, data: bytes) -> bytes:
    buf = bytearray(data)
    for _ in range(rng.randint(1, 8)):
        op = rng.random()
        at = rng.randint(0, len(buf))
        if op < 0.4 and at < len(buf):
            buf[at] = rng.randrange(256)
        elif op < 0.7:
            buf[at:at] = bytes([rng.randrange(256)])
        elif at < len(buf):
            del buf[at]
    return bytes(buf[:1024])


@criterion(10, "DSL round trip over 10,000 programs; parser total on 1,000,000 fuzz inputs")
def test_parser_fuzz():
    rng = random.Random(1_000_000)
    seeds = [render_program(random_program(rng)).encode() for _ in range(2000)]
    crashes = parsed = 0
    for i in range(1_000_000):
        kind = i % 3
        if kind == 0:
            data = mutate(rng, seeds[rng.randrange(len(seeds))])
        elif kind == 1:
            data = "".join(rng.choices(ALPHABET, k=rng.randint(0, 200))).encode()[:1024]
        else:
            data = rng.randbytes(rng.randint(0, 1024))
        assert len(data) <= 1024
        try:
            parse_program(data)
            parsed += 1
        except ParseError:
            pass
        except Exception:
            crashes += 1
    assert crashes == 0
    assert parsed > 0  # some mutations stay grammatical


# --- 11 ---------------------------------------------------------------------------------

@criterion(11, "CLI refine, gen-data and metrics on the toy suite")
def test_end_to_end_cli(tmp_path, capsys):
    runs, data = tmp_path / "runs", tmp_path / "data"
    with Clock() as clock:
        assert main(["refine", "--backend", "oracle", "--run-dir", str(runs)]) == 0
        assert main(["gen-data", "--from-runs", str(runs), "--episodes", "60", "--out", str(data)]) == 0
        assert main(["metrics", str(runs)]) == 0
    out = capsys.readouterr().out
    report = json.loads((runs / "metrics.json").read_text())
    assert report["display"]["ASR"] == "100.0%" and report["display"]["CR-Iter"] == "1.00"
    assert out.splitlines()[-1] == "ASR 100.0%"
    assert sorted(report["tasks"]) == ["pick_dual_bottles", "place_can_left_of_pot", "place_shoe"]
    assert json.loads((data / "manifest.json").read_text())["total"] == 60
    assert clock.seconds < 30.0


# --- 12 ---------------------------------------------------------------------------------

@criterion(12, "expert policy: 100% Easy, Easy >= Hard, Easy = Hard with flags off")
def test_benchmark_harness(lib, aloha, pools):
    tasks = lib.benchmark_tasks()
    easy = run_benchmark(tasks, lib, aloha, ExpertPolicy(), BenchConfig(mode="easy", rollouts_per_task=100), pools)
    hard = run_benchmark(tasks, lib, aloha, ExpertPolicy(), BenchConfig(mode="hard", rollouts_per_task=100), pools)
    off = run_benchmark(tasks, lib, aloha, ExpertPolicy(),
                        BenchConfig(mode="hard", rollouts_per_task=100, randomization=RandomizationConfig.all_off()),
                        pools)
    assert all(easy.rates[t] == 1 for t in tasks)
    assert all(easy.rates[t] >= hard.rates[t] for t in tasks)
    assert off.successes == easy.successes
