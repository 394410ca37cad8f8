"""Deterministic kinematic executor for skill programs.

A trial is a pure function of (program, scene, library, embodiment, config,
seed): the seed jitters the initial object poses and salts grasp sampling,
statements run in order, and the first failing step ends the trial with a
failure cause. Failed steps leave the world untouched.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from . import canon
from .dsl import (
    ArmBinding,
    ArmFor,
    ArmLiteral,
    FunctionalPoint,
    Label,
    Program,
    Scalar,
    SkillCall,
    SkillKind,
    Together,
    validate_program,
)
from .geometry import (
    IDENTITY_QUAT,
    Vec3,
    add,
    angle_between,
    dist,
    quat_between,
    quat_from_yaw,
    quat_mul,
    quat_normalize,
    quat_rotate,
    sub,
    yaw_of,
)
from .grasp import AdaptationConfig, EmptyCandidateSet, GraspFailure, GraspWorld, enumerate_candidates, plan_grasp
from .scene import (
    SUPPORT_TOL,
    AssetLibrary,
    EmbodimentProfile,
    ObjectAsset,
    ObjectInstance,
    Pose,
    Scene,
    SuccessChecker,
    aabb,
    evaluate_checker,
    penetrates,
    support_height,
)
from .seeding import MASK64, mix64, rng_for

HOME_OFFSET: Vec3 = (0.0, 0.10, 0.25)
ARMS = ("left", "right")


class FailureCause(str, enum.Enum):
    UNEXECUTABLE = "UNEXECUTABLE"
    LEFT_GRASP_FAILURE = "LEFT_GRASP_FAILURE"
    RIGHT_GRASP_FAILURE = "RIGHT_GRASP_FAILURE"
    INCORRECT_PLACEMENT = "INCORRECT_PLACEMENT"
    COLLISION = "COLLISION"
    UNREACHABLE = "UNREACHABLE"
    STEP_BUDGET_EXCEEDED = "STEP_BUDGET_EXCEEDED"


def grasp_failure(arm: str) -> FailureCause:
    return FailureCause.LEFT_GRASP_FAILURE if arm == "left" else FailureCause.RIGHT_GRASP_FAILURE


@dataclass(frozen=True)
class SimConfig:
    pos_jitter: float = 0.005
    yaw_jitter: float = 0.1
    reach_margin_frac: float = 0.02
    place_tol: float = 0.01
    max_steps: int = 64
    align_tol: float = 0.1
    grasp: AdaptationConfig = field(default_factory=AdaptationConfig)

    def __post_init__(self):
        vals = (self.pos_jitter, self.yaw_jitter, self.reach_margin_frac, self.place_tol, self.align_tol)
        if min(vals) < 0 or self.max_steps < 1:
            raise ValueError("SimConfig values must be nonnegative and max_steps >= 1")


@dataclass(frozen=True)
class StepRecord:
    step_index: int
    skill: str  # a skill keyword, TOGETHER, or VALIDATE for the pre-flight check
    resolved_args: dict
    outcome: str  # OK | FAIL
    end_effector_poses: tuple[Pose, Pose]
    world_delta: tuple[tuple[str, Pose], ...] = ()
    cause: FailureCause | None = None

    def to_json(self) -> dict:
        return {
            "step_index": self.step_index,
            "skill": self.skill,
            "resolved_args": self.resolved_args,
            "outcome": self.outcome,
            "cause": self.cause.value if self.cause else None,
            "end_effector_poses": {"left": self.end_effector_poses[0].to_json(),
                                   "right": self.end_effector_poses[1].to_json()},
            "world_delta": [{"instance_id": k, "pose": p.to_json()} for k, p in self.world_delta],
        }

    @classmethod
    def from_json(cls, d: dict) -> "StepRecord":
        ee = d["end_effector_poses"]
        return cls(
            step_index=d["step_index"],
            skill=d["skill"],
            resolved_args=d["resolved_args"],
            outcome=d["outcome"],
            end_effector_poses=(Pose.from_json(ee["left"]), Pose.from_json(ee["right"])),
            world_delta=tuple((w["instance_id"], Pose.from_json(w["pose"])) for w in d["world_delta"]),
            cause=FailureCause(d["cause"]) if d.get("cause") else None,
        )


@dataclass(frozen=True)
class TrialLog:
    trial_index: int
    seed: int
    steps: tuple[StepRecord, ...]
    success: bool
    failure_cause: FailureCause | None = None
    failing_step: int | None = None

    def to_json(self) -> dict:
        return {
            "trial_index": self.trial_index,
            "seed": self.seed,
            "success": self.success,
            "failure_cause": self.failure_cause.value if self.failure_cause else None,
            "failing_step": self.failing_step,
            "steps": [s.to_json() for s in self.steps],
        }

    @classmethod
    def from_json(cls, d: dict) -> "TrialLog":
        return cls(
            trial_index=d["trial_index"],
            seed=d["seed"],
            steps=tuple(StepRecord.from_json(s) for s in d["steps"]),
            success=d["success"],
            failure_cause=FailureCause(d["failure_cause"]) if d.get("failure_cause") else None,
            failing_step=d.get("failing_step"),
        )

    def dumps(self) -> str:
        return canon.dumps(self.to_json())


@dataclass(frozen=True)
class ArmState:
    ee: Pose
    gripper: str = "open"
    holding: str | None = None


class StepFailed(Exception):
    def __init__(self, cause: FailureCause, reason: str, args: dict | None = None):
        self.cause = cause
        self.reason = reason
        self.args_ = args or {}
        super().__init__(reason)


class WorldState:
    """Mutable state owned by one trial."""

    def __init__(self, scene: Scene, assets: dict[str, ObjectAsset], emb: EmbodimentProfile):
        self.table_height = scene.table_height
        self.objects: dict[str, ObjectInstance] = {o.instance_id: o for o in scene.objects}
        self.assets = assets
        self.emb = emb
        self.arms: dict[str, ArmState] = {a: ArmState(home_pose(emb, a)) for a in ARMS}
        self.bindings: dict[str, str] = {}

    def copy(self) -> "WorldState":
        other = object.__new__(WorldState)
        other.table_height = self.table_height
        other.objects = dict(self.objects)
        other.assets = self.assets
        other.emb = self.emb
        other.arms = dict(self.arms)
        other.bindings = dict(self.bindings)
        return other

    def asset_of(self, instance_id: str) -> ObjectAsset:
        return self.assets[self.objects[instance_id].asset_id]

    def box(self, instance_id: str, pose: Pose | None = None):
        inst = self.objects[instance_id]
        if pose is not None:
            inst = replace(inst, pose=pose)
        return aabb(inst, self.assets[inst.asset_id])

    def other_boxes(self, *exclude: str):
        return [self.box(k) for k in sorted(self.objects) if k not in exclude]

    def holder_of(self, instance_id: str) -> str | None:
        for a in ARMS:
            if self.arms[a].holding == instance_id:
                return a
        return None

    def holding(self) -> dict[str, str | None]:
        return {a: self.arms[a].holding for a in ARMS}

    def ee_poses(self) -> tuple[Pose, Pose]:
        return (self.arms["left"].ee.rounded(), self.arms["right"].ee.rounded())

    def in_reach(self, arm: str, point, margin_frac: float) -> bool:
        return dist(point, self.emb.base(arm)) < self.emb.reach_radius * (1.0 - margin_frac)


def home_pose(emb: EmbodimentProfile, arm: str) -> Pose:
    return Pose(add(emb.base(arm), HOME_OFFSET), IDENTITY_QUAT)


def jitter_scene(scene: Scene, cfg: SimConfig, seed: int) -> Scene:
    """Seeded planar position and yaw noise on every object's initial pose."""
    rng = rng_for(seed, "jitter")
    moved = {}
    for o in sorted(scene.objects, key=lambda o: o.instance_id):
        dx = rng.uniform(-cfg.pos_jitter, cfg.pos_jitter)
        dy = rng.uniform(-cfg.pos_jitter, cfg.pos_jitter)
        dyaw = rng.uniform(-cfg.yaw_jitter, cfg.yaw_jitter)
        p = o.pose
        moved[o.instance_id] = replace(o, pose=Pose(
            add(p.position, (dx, dy, 0.0)), quat_normalize(quat_mul(quat_from_yaw(dyaw), p.orientation))))
    return replace(scene,
                   task_objects=tuple(moved[o.instance_id] for o in scene.task_objects),
                   distractors=tuple(moved[o.instance_id] for o in scene.distractors))


def _f(v) -> float:
    return float(v.value) if isinstance(v, Scalar) else float(v)


def _qlist(v) -> list[float]:
    return [canon.q(c) for c in v]


class TrialRunner:
    """Executes statements one at a time against a private world state.

    Exposed so stepwise policies can drive the simulator; :func:`run_trial`
    is the whole-program entry point.
    """

    def __init__(self, scene: Scene, library: AssetLibrary | dict, emb: EmbodimentProfile,
                 cfg: SimConfig | None = None, seed: int = 0, *, checker: SuccessChecker | None = None,
                 trial_index: int = 0, jitter: bool = True):
        self.cfg = cfg or SimConfig()
        self.seed = seed & MASK64
        self.trial_index = trial_index
        self.checker = checker
        assets = library.assets if isinstance(library, AssetLibrary) else library
        self.scene = jitter_scene(scene, self.cfg, self.seed) if jitter else scene
        self.state = WorldState(self.scene, {o.asset_id: assets[o.asset_id] for o in self.scene.objects}, emb)
        self.emb = emb
        self.steps: list[StepRecord] = []
        self.failed: StepRecord | None = None

    # public -------------------------------------------------------------
    @property
    def done(self) -> bool:
        return self.failed is not None

    def fail_unexecutable(self, issues) -> None:
        rec = StepRecord(0, "VALIDATE", {"issues": [str(i) for i in issues]}, "FAIL",
                         self.state.ee_poses(), (), FailureCause.UNEXECUTABLE)
        self.steps.append(rec)
        self.failed = rec

    def execute(self, stmt) -> StepRecord | None:
        """Run one statement; bindings produce no record. No-op once failed."""
        if self.failed is not None:
            return None
        if isinstance(stmt, ArmBinding):
            try:
                self.state.bindings[stmt.name] = self._resolve_selector(stmt.selector)
            except StepFailed as exc:
                return self._record_fail("BIND", {"name": stmt.name}, exc)
            return None
        index = len(self.steps)
        skill = "TOGETHER" if isinstance(stmt, Together) else stmt.skill.value
        if index >= self.cfg.max_steps:
            return self._record_fail(skill, {}, StepFailed(FailureCause.STEP_BUDGET_EXCEEDED, "step budget exhausted"))
        before = {k: v.pose for k, v in self.state.objects.items()}
        trial_state = self.state.copy()
        try:
            if isinstance(stmt, Together):
                args = self._together(trial_state, stmt, index)
            else:
                args = self._call(trial_state, stmt, index)
        except StepFailed as exc:
            return self._record_fail(skill, exc.args_, exc)
        self.state = trial_state
        delta = tuple((k, trial_state.objects[k].pose.rounded()) for k in sorted(trial_state.objects)
                      if trial_state.objects[k].pose != before.get(k))
        rec = StepRecord(index, skill, args, "OK", trial_state.ee_poses(), delta, None)
        self.steps.append(rec)
        return rec

    def finish(self) -> TrialLog:
        if self.failed is not None:
            return TrialLog(self.trial_index, self.seed, tuple(self.steps), False,
                            self.failed.cause, self.failed.step_index)
        ok = True
        if self.checker is not None:
            st = self.state
            ok = evaluate_checker(self.checker, st.objects, st.assets, st.holding())
        if ok:
            return TrialLog(self.trial_index, self.seed, tuple(self.steps), True)
        last = len(self.steps) - 1 if self.steps else None
        return TrialLog(self.trial_index, self.seed, tuple(self.steps), False,
                        FailureCause.INCORRECT_PLACEMENT, last)

    def snapshot(self) -> str:
        return snapshot(self.state, len(self.steps))

    # internals ----------------------------------------------------------
    def _record_fail(self, skill: str, args: dict, exc: StepFailed) -> StepRecord:
        args = dict(args)
        args["reason"] = exc.reason
        rec = StepRecord(len(self.steps), skill, args, "FAIL", self.state.ee_poses(), (), exc.cause)
        self.steps.append(rec)
        self.failed = rec
        return rec

    def _resolve_selector(self, sel) -> str:
        if isinstance(sel, ArmLiteral):
            return sel.side
        if isinstance(sel, ArmFor):
            inst = self.state.objects.get(sel.obj)
            if inst is None:
                raise StepFailed(FailureCause.UNEXECUTABLE, f"unknown object {sel.obj}")
            return "left" if inst.pose.position[0] < 0 else "right"
        raise TypeError(sel)

    def _arm(self, state: WorldState, ref) -> str:
        if isinstance(ref, ArmLiteral):
            return ref.side
        if ref.name not in state.bindings:
            raise StepFailed(FailureCause.UNEXECUTABLE, f"unbound arm {ref.name}")
        return state.bindings[ref.name]

    def _together(self, state: WorldState, stmt: Together, index: int) -> dict:
        arms_a = {self._arm(state, c.arm) for c in stmt.branch_a}
        arms_b = {self._arm(state, c.arm) for c in stmt.branch_b}
        if arms_a & arms_b:
            raise StepFailed(FailureCause.COLLISION, "both branches drive the same arm",
                             {"arms": sorted(arms_a | arms_b)})
        order = []
        for k in range(max(len(stmt.branch_a), len(stmt.branch_b))):
            if k < len(stmt.branch_a):
                order.append(("a", stmt.branch_a[k]))
            if k < len(stmt.branch_b):
                order.append(("b", stmt.branch_b[k]))
        calls = []
        for sub_index, (branch, call) in enumerate(order):
            try:
                args = self._call(state, call, index, sub_index)
            except StepFailed as exc:
                exc.args_ = {"calls": calls, "failed_call": {"branch": branch, "skill": call.skill.value, **exc.args_}}
                raise
            calls.append({"branch": branch, "skill": call.skill.value, **args})
        return {"calls": calls}

    def _call(self, state: WorldState, call: SkillCall, index: int, sub_index: int = 0) -> dict:
        arm = self._arm(state, call.arm)
        handler = {
            SkillKind.GRASP: self._grasp,
            SkillKind.PLACE: self._place,
            SkillKind.MOVE_BY: self._move_by,
            SkillKind.OPEN_GRIPPER: self._open,
            SkillKind.CLOSE_GRIPPER: self._close,
            SkillKind.BACK_TO_ORIGIN: self._home,
        }[call.skill]
        return handler(state, arm, call, index, sub_index)

    def _grasp(self, state, arm, call, index, sub_index) -> dict:
        args = {"arm": arm, "obj": call.obj, "pre": canon.q(_f(call.kwarg("pre", 0.1))),
                "depth": canon.q(_f(call.kwarg("depth", 0.0)))}
        if call.obj not in state.objects:
            raise StepFailed(FailureCause.UNEXECUTABLE, f"unknown object {call.obj}", args)
        if state.arms[arm].holding is not None:
            raise StepFailed(grasp_failure(arm), f"{arm} gripper already holds {state.arms[arm].holding}", args)
        holder = state.holder_of(call.obj)
        if holder is not None:
            raise StepFailed(grasp_failure(arm), f"{call.obj} is held by the {holder} arm", args)
        gcfg = replace(self.cfg.grasp, seed=mix64(self.cfg.grasp.seed, self.seed, index, sub_index))
        inst = state.objects[call.obj]
        try:
            cands = enumerate_candidates(state.asset_of(call.obj), inst.pose, self.emb, gcfg, arm=arm)
            world = GraspWorld(tuple(state.other_boxes(call.obj)), state.table_height)
            plan = plan_grasp(cands, world, arm, self.emb, gcfg, self.cfg.reach_margin_frac)
        except EmptyCandidateSet as exc:
            raise StepFailed(grasp_failure(arm), str(exc), args) from None
        except GraspFailure as exc:
            args.update(attempted=exc.attempted, reasons=exc.reasons)
            raise StepFailed(grasp_failure(arm), "no feasible grasp candidate", args) from None
        c = plan.candidate
        ee = Pose(c.ee_point, quat_between((0.0, 0.0, -1.0), c.approach_vector))
        state.arms[arm] = ArmState(ee, "closed", call.obj)
        args["plan"] = {"annotation_index": c.annotation_index, "approach": c.approach,
                        "perturbation_index": c.perturbation_index, "angle": canon.q(c.perturbation_angle),
                        "score": canon.q(c.score), "attempted": plan.attempted}
        return args

    def _carry(self, state: WorldState, arm: str, delta, args: dict) -> None:
        """Translate the arm's end effector (and anything it holds) by ``delta``."""
        st = state.arms[arm]
        new_ee = add(st.ee.position, delta)
        if not state.in_reach(arm, new_ee, self.cfg.reach_margin_frac):
            raise StepFailed(FailureCause.UNREACHABLE, f"{arm} end effector would leave its reach", args)
        if st.holding is not None:
            held = st.holding
            new_pose = state.objects[held].pose.translated(delta)
            lo, hi = state.box(held, new_pose)
            if lo[2] < state.table_height - SUPPORT_TOL:
                raise StepFailed(FailureCause.COLLISION, f"{held} would pass through the table", args)
            for other in sorted(state.objects):
                if other != held and penetrates(lo, hi, *state.box(other)):
                    raise StepFailed(FailureCause.COLLISION, f"{held} would collide with {other}", args)
            state.objects[held] = replace(state.objects[held], pose=new_pose)
        state.arms[arm] = replace(st, ee=Pose(new_ee, st.ee.orientation))

    def _move_by(self, state, arm, call, index, sub_index) -> dict:
        d = tuple(_f(call.kwarg(k, 0.0)) for k in ("dx", "dy", "dz"))
        frame = call.kwarg("frame", Label("world")).name
        if frame == "local":
            d = quat_rotate(state.arms[arm].ee.orientation, d)
        args = {"arm": arm, "delta": _qlist(d), "frame": frame}
        self._carry(state, arm, d, args)
        return args

    def _home(self, state, arm, call, index, sub_index) -> dict:
        target = home_pose(self.emb, arm).position
        delta = sub(target, state.arms[arm].ee.position)
        args = {"arm": arm, "target": _qlist(target)}
        self._carry(state, arm, delta, args)
        state.arms[arm] = replace(state.arms[arm], ee=Pose(target, IDENTITY_QUAT))
        return args

    def _open(self, state, arm, call, index, sub_index) -> dict:
        st = state.arms[arm]
        args = {"arm": arm, "released": st.holding}
        if st.holding is not None:
            held = st.holding
            box = state.box(held)
            drop = box[0][2] - support_height(box, state.other_boxes(held), state.table_height)
            if drop > 0:
                state.objects[held] = replace(state.objects[held],
                                              pose=state.objects[held].pose.translated((0.0, 0.0, -drop)))
            args["drop"] = canon.q(max(drop, 0.0))
        state.arms[arm] = replace(st, gripper="open", holding=None)
        return args

    def _close(self, state, arm, call, index, sub_index) -> dict:
        state.arms[arm] = replace(state.arms[arm], gripper="closed")
        return {"arm": arm}

    def _place(self, state, arm, call, index, sub_index) -> dict:
        target = call.kwarg("target")
        fp_index = int(_f(call.kwarg("fp", 0)))
        constrain = call.kwarg("constrain", Label("free")).name
        args = {"arm": arm, "obj": call.obj, "fp": fp_index, "constrain": constrain,
                "pre": canon.q(_f(call.kwarg("pre", 0.1)))}
        if not isinstance(target, FunctionalPoint):
            raise StepFailed(FailureCause.UNEXECUTABLE, "place needs target=fp(object, index)", args)
        args["target"] = {"obj": target.obj, "index": target.index}
        if call.obj not in state.objects or target.obj not in state.objects:
            raise StepFailed(FailureCause.UNEXECUTABLE, "unknown object", args)
        if state.arms[arm].holding != call.obj:
            raise StepFailed(FailureCause.INCORRECT_PLACEMENT, f"{arm} arm is not holding {call.obj}", args)
        if target.obj == call.obj:
            raise StepFailed(FailureCause.INCORRECT_PLACEMENT, "cannot place an object onto itself", args)
        held_asset, target_asset = state.asset_of(call.obj), state.asset_of(target.obj)
        if fp_index >= len(held_asset.functional_points) or target.index >= len(target_asset.functional_points):
            raise StepFailed(FailureCause.UNEXECUTABLE, "functional point index out of range", args)
        target_inst = state.objects[target.obj]
        target_fp = target_asset.functional_points[target.index]
        target_point = target_inst.pose.apply(target_fp.position)
        held = state.objects[call.obj]
        held_fp = held_asset.functional_points[fp_index]
        orientation = held.pose.orientation
        if constrain == "align":
            tgt_axis = quat_rotate(quat_mul(target_inst.pose.orientation, target_fp.orientation), (1.0, 0.0, 0.0))
            cur_axis = quat_rotate(quat_mul(orientation, held_fp.orientation), (1.0, 0.0, 0.0))
            turn = math.atan2(tgt_axis[1], tgt_axis[0]) - math.atan2(cur_axis[1], cur_axis[0])
            orientation = quat_normalize(quat_mul(quat_from_yaw(turn), orientation))
            residual = angle_between(quat_rotate(quat_mul(orientation, held_fp.orientation), (1.0, 0.0, 0.0)),
                                     tgt_axis)
            args["align_residual"] = canon.q(residual)
            if residual > self.cfg.align_tol:
                raise StepFailed(FailureCause.INCORRECT_PLACEMENT, "functional axes cannot be aligned", args)
        position = sub(target_point, quat_rotate(orientation, held_fp.position))
        released = Pose(position, orientation)
        delta = sub(position, held.pose.position)
        new_ee = add(state.arms[arm].ee.position, delta)
        if not state.in_reach(arm, new_ee, self.cfg.reach_margin_frac):
            raise StepFailed(FailureCause.UNREACHABLE, f"placement target is outside the {arm} arm's reach", args)
        lo, hi = state.box(call.obj, released)
        others = state.other_boxes(call.obj)
        if lo[2] < state.table_height - SUPPORT_TOL or any(penetrates(lo, hi, *b) for b in others):
            raise StepFailed(FailureCause.INCORRECT_PLACEMENT, "placement intersects the table or another object",
                             args)
        drop = lo[2] - support_height((lo, hi), others, state.table_height)
        args["error"] = canon.q(drop)
        if drop > self.cfg.place_tol:
            raise StepFailed(FailureCause.INCORRECT_PLACEMENT,
                             f"released {drop:.3f} m above its support (tolerance {self.cfg.place_tol})", args)
        state.objects[call.obj] = replace(held, pose=released.translated((0.0, 0.0, -max(drop, 0.0))))
        state.arms[arm] = ArmState(Pose(new_ee, state.arms[arm].ee.orientation), "open", None)
        return args



def _run(program: Program, scene: Scene, library, emb, cfg, seed, checker, trial_index, trace):
    runner = TrialRunner(scene, library, emb, cfg, seed, checker=checker, trial_index=trial_index)
    shots = [runner.snapshot()] if trace else None
    issues = validate_program(program, scene.object_names(), emb)
    if issues:
        runner.fail_unexecutable(issues)
    else:
        for stmt in program.statements:
            rec = runner.execute(stmt)
            if trace and rec is not None:
                shots.append(runner.snapshot())
            if runner.done:
                break
    return runner.finish(), shots


def run_trial(program: Program, scene: Scene, library, emb: EmbodimentProfile, cfg: SimConfig | None = None,
              seed: int = 0, *, checker: SuccessChecker | None = None, trial_index: int = 0) -> TrialLog:
    """Execute ``program`` once. Never raises for program faults; they land in the log."""
    return _run(program, scene, library, emb, cfg, seed, checker, trial_index, False)[0]


def trace_trial(program: Program, scene: Scene, library, emb: EmbodimentProfile, cfg: SimConfig | None = None,
                seed: int = 0, *, checker: SuccessChecker | None = None,
                trial_index: int = 0) -> tuple[TrialLog, list[str]]:
    """Like :func:`run_trial`, also returning a text snapshot before and after every step."""
    return _run(program, scene, library, emb, cfg, seed, checker, trial_index, True)


def trial_seed(run_seed: int, j: int) -> int:
    return mix64(run_seed, j)


def run_batch(program: Program, scene: Scene, library, emb: EmbodimentProfile, cfg: SimConfig | None = None,
              run_seed: int = 0, M: int = 10, *, checker: SuccessChecker | None = None,
              workers: int = 1) -> list[TrialLog]:
    """``M`` independent trials; trial ``j`` uses ``mix64(run_seed, j)``. Order-independent."""
    if M < 1:
        raise ValueError("M must be >= 1")

    def one(j: int) -> TrialLog:
        return run_trial(program, scene, library, emb, cfg, trial_seed(run_seed, j), checker=checker, trial_index=j)

    if workers <= 1:
        return [one(j) for j in range(M)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(M)))


def unexecutable_log(trial_index: int, seed: int, issues, emb: EmbodimentProfile) -> TrialLog:
    """The log a trial produces when there is no executable program at all."""
    ee = (home_pose(emb, "left").rounded(), home_pose(emb, "right").rounded())
    rec = StepRecord(0, "VALIDATE", {"issues": [str(i) for i in issues]}, "FAIL", ee, (), FailureCause.UNEXECUTABLE)
    return TrialLog(trial_index, seed & MASK64, (rec,), False, FailureCause.UNEXECUTABLE, 0)


def _fmt(v) -> str:
    return "(" + ",".join(canon.format_float(c) for c in v) + ")"


def snapshot(state, step_index: int) -> str:
    """Canonical text rendering of a world state (or a bare :class:`Scene`)."""
    lines = [f"snapshot step={step_index}", f"table_height={canon.format_float(state.table_height)}"]
    if isinstance(state, WorldState):
        for a in ARMS:
            st = state.arms[a]
            lines.append(f"arm {a} gripper={st.gripper} holding={st.holding or '-'} ee={_fmt(st.ee.position)}")
        objects = state.objects
    else:
        objects = {o.instance_id: o for o in state.objects}
    for k in sorted(objects):
        o = objects[k]
        lines.append(f"{k} pos={_fmt(o.pose.position)} yaw={canon.format_float(yaw_of(o.pose.orientation))} "
                     f"asset={o.asset_id}{' distractor' if o.is_distractor else ''}")
    return "\n".join(lines) + "\n"
