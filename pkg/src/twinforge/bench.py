"""Easy/Hard policy benchmark over toy tasks, plus a synthetic grasp-adaptation suite."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Protocol

from . import canon
from .dsl import ArmBinding, Program, SkillCall, Together, parse_program, validate_program
from .metrics import percent
from .randomization import InstructionPools, RandomizationConfig, bind_scene, compose_instruction, randomize_scene
from .scene import (
    AssetLibrary,
    EmbodimentProfile,
    ObjectAsset,
    ObjectInstance,
    Scene,
    TaskSpec,
    build_scene,
    resting_pose,
)
from .seeding import label_seed, mix64, rng_for
from .sim import SimConfig, TrialRunner

MODES = ("easy", "hard")


class ProgramPolicy(Protocol):
    def program(self, task: TaskSpec, scene: Scene, instruction: str) -> Program | str: ...


class StepPolicy(Protocol):
    def reset(self, task: TaskSpec, instruction: str) -> None: ...

    def next_action(self, snapshot: str, instruction: str) -> SkillCall | Together | ArmBinding | None: ...


class ExpertPolicy:
    """Replays each task's bundled expert program."""

    def program(self, task: TaskSpec, scene: Scene, instruction: str) -> Program:
        if task.expert_program is None:
            raise ValueError(f"{task.task_name} has no expert program")
        return parse_program(task.expert_program)


class ExpertStepPolicy:
    """The expert program fed one statement at a time; exercises the stepwise interface."""

    def __init__(self, library: AssetLibrary):
        self.library = library
        self._queue: list = []

    def reset(self, task: TaskSpec, instruction: str) -> None:
        self._queue = list(parse_program(task.expert_program).statements)

    def next_action(self, snapshot: str, instruction: str):
        return self._queue.pop(0) if self._queue else None


@dataclass(frozen=True)
class BenchConfig:
    mode: str = "easy"
    rollouts_per_task: int = 100
    demos_per_task: int = 50
    randomization: RandomizationConfig = field(default_factory=RandomizationConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.rollouts_per_task < 1 or self.workers < 1:
            raise ValueError("rollouts_per_task and workers must be >= 1")


@dataclass(frozen=True)
class BenchResult:
    mode: str
    successes: dict[str, int]
    rollouts: int

    @property
    def rates(self) -> dict[str, Fraction]:
        return {k: Fraction(v, self.rollouts) for k, v in self.successes.items()}

    @property
    def mean(self) -> Fraction:
        r = self.rates
        return sum(r.values(), Fraction(0)) / len(r) if r else Fraction(0)

    def to_json(self) -> dict:
        return {"mode": self.mode, "rollouts": self.rollouts,
                "tasks": {k: {"successes": v, "rate": percent(Fraction(v, self.rollouts))}
                          for k, v in sorted(self.successes.items())},
                "mean": percent(self.mean)}

    def to_text(self) -> str:
        rows = [("task", "successes", "rate")]
        rows += [(k, f"{v}/{self.rollouts}", percent(Fraction(v, self.rollouts)))
                 for k, v in sorted(self.successes.items())]
        rows.append(("mean", "", percent(self.mean)))
        widths = [max(len(r[c]) for r in rows) for c in range(3)]
        return "\n".join("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in
                                   enumerate(zip(r, widths))).rstrip() for r in rows) + f"\nmode {self.mode}\n"


def rollout_seed(base: int, task_name: str, r: int) -> int:
    return mix64(base, label_seed(task_name), r)


def _rollout(task: TaskSpec, library: AssetLibrary, emb: EmbodimentProfile, policy, cfg: BenchConfig,
             pools: InstructionPools | None, seed: int) -> bool:
    scene = build_scene(task, library)
    if cfg.mode == "hard":
        scene = randomize_scene(scene, library, cfg.randomization, seed)
    split = "eval" if cfg.mode == "hard" else "train"
    ref = task.instruction_pool_ref or task.task_name
    if pools is not None and ref in pools.tasks:
        instruction = compose_instruction(pools.tasks[ref], pools, bind_scene(task, scene), seed, split).text
    else:
        instruction = task.description
    try:
        runner = TrialRunner(scene, library, emb, cfg.sim, seed, checker=task.checker)
        if hasattr(policy, "program"):
            program = policy.program(task, scene, instruction)
            program = parse_program(program) if isinstance(program, str) else program
            issues = validate_program(program, scene.object_names(), emb)
            if issues:
                return False
            for stmt in program.statements:
                runner.execute(stmt)
                if runner.done:
                    break
        else:
            policy.reset(task, instruction)
            for _ in range(cfg.sim.max_steps + 1):
                action = policy.next_action(runner.snapshot(), instruction)
                if action is None:
                    break
                runner.execute(action)
                if runner.done:
                    break
        return runner.finish().success
    except Exception:  # a crashing policy is a failed rollout
        return False


def run_benchmark(tasks, library: AssetLibrary, emb: EmbodimentProfile, policy, cfg: BenchConfig,
                  pools: InstructionPools | None = None, seeds=None) -> BenchResult:
    """Roll ``policy`` out ``rollouts_per_task`` times per task.

    Rollout ``r`` of a task uses ``seeds[r]`` when given, else a seed mixed
    from ``cfg.seed``, the task name and ``r``. Hard mode randomizes each
    scene and draws eval-split language.
    """
    names = [t.task_name if isinstance(t, TaskSpec) else t for t in tasks]
    results = {}
    for name in names:
        task = library.tasks[name]
        rs = [seeds[r] if seeds is not None else rollout_seed(cfg.seed, name, r)
              for r in range(cfg.rollouts_per_task)]
        work = lambda s: _rollout(task, library, emb, policy, cfg, pools, s)  # noqa: E731
        if cfg.workers > 1 and hasattr(policy, "program"):
            with ThreadPoolExecutor(cfg.workers) as ex:
                outcomes = list(ex.map(work, rs))
        else:
            outcomes = [work(s) for s in rs]
        results[name] = sum(outcomes)
    return BenchResult(cfg.mode, results, cfg.rollouts_per_task)


# --- grasp adaptation suite -----------------------------------------------------------

GRASP_TARGETS = ("bottle", "can")


def grasp_suite(library: AssetLibrary, n: int = 200, seed: int = 0) -> tuple[AssetLibrary, list[Scene]]:
    """Scenes of one graspable ``target`` hemmed in by box obstacles.

    Each obstacle is a synthetic box whose top sits a few millimeters above
    the target's grasp point, so a level side approach on that side is
    blocked while a tilted one may pass over. Returns the library extended
    with those boxes, plus the scenes.
    """
    cats = library.by_category
    targets = [a for c in GRASP_TARGETS for a in cats.get(c, ())]
    if not targets:
        raise ValueError("library lacks grasp-suite assets")
    assets = dict(library.assets)
    scenes = []
    table = 0.75
    for k in range(n):
        rng = rng_for(seed, "grasp_suite", k)
        asset = library.asset(rng.choice(targets))
        x, y = rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.25)
        if abs(x) < 0.03:
            x = math.copysign(0.03, x or 1.0)
        target = ObjectInstance("target", asset.asset_id, resting_pose(asset, x, y, table, 0.0).rounded())
        contact_z = table + asset.aabb_half_extents[2] + min(g.grasp_point[2] for g in asset.grasp_annotations)
        half = asset.aabb_half_extents
        sides = [(1, 0), (-1, 0), (0, 1), (0, -1)]
        rng.shuffle(sides)
        obstacles = []
        for j, (sx, sy) in enumerate(sides[:rng.randint(2, 4)]):
            top = contact_z + rng.uniform(0.001, 0.02)
            # lateral width capped at the target's, so boxes on adjacent sides never meet at a corner
            across = rng.uniform(0.02, 0.05)
            depth = rng.uniform(0.02, 0.05)
            oh = ((depth, min(across, half[1]), (top - table) / 2) if sx else
                  (min(across, half[0]), depth, (top - table) / 2))
            aid = f"suite_box_{k}_{j}"
            assets[aid] = ObjectAsset(aid, "suite_box", tuple(canon.q(c) for c in oh), descriptions=("box",))
            gap = rng.uniform(0.004, 0.02)
            ox = x + sx * (half[0] + oh[0] + gap)
            oy = y + sy * (half[1] + oh[1] + gap)
            obstacles.append(ObjectInstance(f"obstacle_{j}", aid,
                                            resting_pose(assets[aid], ox, oy, table, 0.0).rounded(), True))
        scenes.append(Scene(table_height=table, task_objects=(target,), distractors=tuple(obstacles)))
    return replace(library, assets=assets), scenes


PROBE = parse_program("task probe\narm a = arm_for(target)\ngrasp(a, target, pre=0.1, depth=0.0)\n")


def grasp_successes(scenes, library: AssetLibrary, emb: EmbodimentProfile, K: int,
                    sim: SimConfig | None = None) -> set[int]:
    """Indices of suite scenes where the grasp succeeds with ``K`` perturbations per approach.

    Object jitter is off so K is the only variable.
    """
    base = sim or SimConfig()
    cfg = replace(base, grasp=replace(base.grasp, K=K))
    won = set()
    for i, scene in enumerate(scenes):
        runner = TrialRunner(scene, library, emb, cfg, i, jitter=False)
        for stmt in PROBE.statements:
            runner.execute(stmt)
        if runner.finish().success:
            won.add(i)
    return won


def grasp_report(library: AssetLibrary, emb_names=("piper", "franka"), n: int = 200, seed: int = 0,
                 K: int = 8) -> dict:
    library, scenes = grasp_suite(library, n, seed)
    out = {}
    for name in emb_names:
        emb = library.embodiments[name]
        base, adapted = grasp_successes(scenes, library, emb, 0), grasp_successes(scenes, library, emb, K)
        out[name] = {"K0": len(base), f"K{K}": len(adapted), "superset": base <= adapted,
                     "gain": percent(Fraction(len(adapted) - len(base), n))}
    return out


__all__ = ["ExpertPolicy", "ExpertStepPolicy", "BenchConfig", "BenchResult", "run_benchmark", "rollout_seed",
           "grasp_suite", "grasp_successes", "grasp_report"]
