"""Object assets, embodiments, placed scenes, task specs and success checks.

World frame: origin at the table centre, x lateral (negative is the left arm's
side), y away from the robots, z up. The table top sits at ``z = table_height``.
All lengths are meters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

from . import canon
from .geometry import (
    IDENTITY_QUAT,
    Quat,
    Vec3,
    add,
    dist,
    norm,
    quat_from_yaw,
    quat_norm,
    quat_normalize,
    quat_rotate,
)

SCHEMA_VERSION = 1
APPROACHES = ("TOP_DOWN", "SIDE_XPOS", "SIDE_XNEG", "SIDE_YPOS", "SIDE_YNEG")
# direction the gripper travels while closing in; SIDE_XPOS comes from the +x side
APPROACH_VECTORS: dict[str, Vec3] = {
    "TOP_DOWN": (0.0, 0.0, -1.0),
    "SIDE_XPOS": (-1.0, 0.0, 0.0),
    "SIDE_XNEG": (1.0, 0.0, 0.0),
    "SIDE_YPOS": (0.0, -1.0, 0.0),
    "SIDE_YNEG": (0.0, 1.0, 0.0),
}
QUAT_TOL = 1e-9
# six stored decimals cannot hold a unit quaternion to 1e-9
MANIFEST_QUAT_TOL = 1e-5
SUPPORT_TOL = 0.001
TEXTURE_TAGS = ("surface", "background")


class ManifestError(ValueError):
    def __init__(self, kind: str, detail: str):
        self.kind = kind
        self.detail = detail
        super().__init__(f"{kind}: {detail}")


@dataclass(frozen=True)
class Pose:
    position: Vec3 = (0.0, 0.0, 0.0)
    orientation: Quat = IDENTITY_QUAT

    @classmethod
    def from_xyz_yaw(cls, x: float, y: float, z: float, yaw: float = 0.0) -> "Pose":
        return cls((x, y, z), quat_from_yaw(yaw) if yaw else IDENTITY_QUAT)

    def apply(self, local) -> Vec3:
        return add(quat_rotate(quat_normalize(self.orientation), local), self.position)

    def translated(self, delta) -> "Pose":
        return Pose(add(self.position, delta), self.orientation)

    def is_valid(self, tol: float = QUAT_TOL) -> bool:
        vals = (*self.position, *self.orientation)
        return all(math.isfinite(v) for v in vals) and abs(quat_norm(self.orientation) - 1.0) <= tol

    def to_json(self) -> dict:
        return {"position": list(self.position), "orientation": list(self.orientation)}

    @classmethod
    def from_json(cls, d: dict) -> "Pose":
        return cls(_vec(d["position"], 3, "position"), _vec(d.get("orientation", IDENTITY_QUAT), 4, "orientation"))

    def rounded(self) -> "Pose":
        return Pose(canon.qvec(self.position), canon.qvec(self.orientation))


@dataclass(frozen=True)
class GraspAnnotation:
    grasp_point: Vec3
    grasp_axis: Vec3
    allowed_approaches: tuple[str, ...]
    required_width: float


@dataclass(frozen=True)
class ObjectAsset:
    asset_id: str
    category: str
    aabb_half_extents: Vec3
    grasp_annotations: tuple[GraspAnnotation, ...] = ()
    functional_points: tuple[Pose, ...] = ()
    placement_points: tuple[Pose, ...] = ()
    descriptions: tuple[str, ...] = ()


@dataclass(frozen=True)
class EmbodimentProfile:
    name: str
    left_base: Vec3
    right_base: Vec3
    reach_radius: float
    feasible_approaches: tuple[str, ...]
    max_gripper_width: float
    dof: int

    def base(self, arm: str) -> Vec3:
        return self.left_base if arm == "left" else self.right_base


@dataclass(frozen=True)
class ObjectInstance:
    instance_id: str
    asset_id: str
    pose: Pose
    is_distractor: bool = False


@dataclass(frozen=True)
class LightingSample:
    color_temperature: float = 6500.0
    type: str = "directional"
    intensity: float = 1.0
    position: Vec3 = (0.0, 0.0, 2.0)

    def to_json(self) -> dict:
        return {"color_temperature": self.color_temperature, "type": self.type,
                "intensity": self.intensity, "position": list(self.position)}

    @classmethod
    def from_json(cls, d: dict) -> "LightingSample":
        return cls(float(d["color_temperature"]), d["type"], float(d["intensity"]), _vec(d["position"], 3, "position"))


DEFAULT_TABLE_HEIGHT = 0.75
DEFAULT_CAMERA = Pose((0.0, -0.6, 1.35), IDENTITY_QUAT)


@dataclass(frozen=True)
class Scene:
    table_height: float = DEFAULT_TABLE_HEIGHT
    task_objects: tuple[ObjectInstance, ...] = ()
    distractors: tuple[ObjectInstance, ...] = ()
    lighting: LightingSample = field(default_factory=LightingSample)
    texture_ids: tuple[str, str] = ("default_table", "default_background")
    camera_pose: Pose = DEFAULT_CAMERA

    @property
    def objects(self) -> tuple[ObjectInstance, ...]:
        return self.task_objects + self.distractors

    def object_names(self) -> set[str]:
        return {o.instance_id for o in self.objects}

    def to_json(self) -> dict:
        return {
            "table_height": self.table_height,
            "task_objects": [_instance_json(o) for o in self.task_objects],
            "distractors": [_instance_json(o) for o in self.distractors],
            "lighting": self.lighting.to_json(),
            "texture_ids": list(self.texture_ids),
            "camera_pose": self.camera_pose.to_json(),
        }


def _instance_json(o: ObjectInstance) -> dict:
    return {"instance_id": o.instance_id, "asset_id": o.asset_id, "pose": o.pose.to_json(),
            "is_distractor": o.is_distractor}


# --- success predicates -----------------------------------------------------

@dataclass(frozen=True)
class WithinDistance:
    a: str
    a_point: int
    b: str
    b_point: int
    tol: float


@dataclass(frozen=True)
class RelativeX:
    a: str
    b: str
    sign: int  # -1: a left of b, +1: a right of b


@dataclass(frozen=True)
class OnTopOf:
    a: str
    b: str
    tol: float


@dataclass(frozen=True)
class GripperHolding:
    arm: str  # left | right | any
    obj: str
    negate: bool = False


Predicate = Union[WithinDistance, RelativeX, OnTopOf, GripperHolding]


@dataclass(frozen=True)
class SuccessChecker:
    predicates: tuple[Predicate, ...] = ()


@dataclass(frozen=True)
class Slot:
    slot: str  # template letter, e.g. "A"
    instance_id: str
    category: str
    asset_id: str
    position: tuple[float, float]
    yaw: float = 0.0


@dataclass(frozen=True)
class TaskSpec:
    task_name: str
    description: str
    slots: tuple[Slot, ...]
    checker: SuccessChecker
    instruction_pool_ref: str = ""
    expert_program: str | None = None
    benchmark: bool = True

    @property
    def required_assets(self) -> dict[str, str]:
        return {s.slot: s.category for s in self.slots}

    def slot(self, letter: str) -> Slot:
        for s in self.slots:
            if s.slot == letter:
                return s
        raise KeyError(letter)


@dataclass(frozen=True)
class TextureEntry:
    texture_id: str
    tag: str


@dataclass(frozen=True)
class AssetLibrary:
    assets: dict[str, ObjectAsset]
    embodiments: dict[str, EmbodimentProfile] = field(default_factory=dict)
    tasks: dict[str, TaskSpec] = field(default_factory=dict)
    textures: tuple[TextureEntry, ...] = ()

    @property
    def by_category(self) -> dict[str, tuple[str, ...]]:
        index: dict[str, list[str]] = {}
        for aid in sorted(self.assets):
            index.setdefault(self.assets[aid].category, []).append(aid)
        return {k: tuple(v) for k, v in index.items()}

    def asset(self, asset_id: str) -> ObjectAsset:
        return self.assets[asset_id]

    def benchmark_tasks(self) -> list[str]:
        return [name for name in sorted(self.tasks) if self.tasks[name].benchmark]


# --- geometry on placed objects --------------------------------------------

def world_point(instance: ObjectInstance, local) -> Vec3:
    """Map an object-local point into the world frame."""
    return instance.pose.apply(local)


def aabb(instance: ObjectInstance, asset: ObjectAsset) -> tuple[Vec3, Vec3]:
    """World AABB; rotation is ignored by design (boxes stay axis-aligned)."""
    p, h = instance.pose.position, asset.aabb_half_extents
    return (p[0] - h[0], p[1] - h[1], p[2] - h[2]), (p[0] + h[0], p[1] + h[1], p[2] + h[2])


def boxes_overlap(a_lo, a_hi, b_lo, b_hi, margin: float = 0.0) -> bool:
    """Closed-interval test, so touching boxes count as overlapping."""
    for i in range(3):
        if a_lo[i] - margin > b_hi[i] + margin or b_lo[i] - margin > a_hi[i] + margin:
            return False
    return True


def aabb_overlap(a: tuple[ObjectInstance, ObjectAsset], b: tuple[ObjectInstance, ObjectAsset],
                 margin: float = 0.0) -> bool:
    """True iff both boxes, each inflated by ``margin``, intersect."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return boxes_overlap(*aabb(*a), *aabb(*b), margin)


def penetrates(a_lo, a_hi, b_lo, b_hi, tol: float = SUPPORT_TOL) -> bool:
    """Interpenetration deeper than ``tol`` on every axis (resting contact is fine)."""
    for i in range(3):
        if min(a_hi[i], b_hi[i]) - max(a_lo[i], b_lo[i]) <= tol:
            return False
    return True


def _footprints_overlap(a_lo, a_hi, b_lo, b_hi) -> bool:
    return a_lo[0] < b_hi[0] and b_lo[0] < a_hi[0] and a_lo[1] < b_hi[1] and b_lo[1] < a_hi[1]


def support_height(box, others, table_height: float) -> float:
    """Highest surface under ``box`` that it could rest on (table or another box)."""
    lo, hi = box
    best = table_height
    for o_lo, o_hi in others:
        if _footprints_overlap(lo, hi, o_lo, o_hi) and o_hi[2] <= lo[2] + SUPPORT_TOL:
            best = max(best, o_hi[2])
    return best


@dataclass(frozen=True)
class SupportViolation:
    instance_id: str
    gap: float  # bottom face minus support surface; positive means floating

    def __str__(self) -> str:
        return f"{self.instance_id}: bottom is {self.gap * 1000:.1f} mm off its support"


def check_support(scene: Scene, library: AssetLibrary | dict) -> list[SupportViolation]:
    """Objects whose bottom face is more than 1 mm from their support surface."""
    assets = library.assets if isinstance(library, AssetLibrary) else library
    boxes = {o.instance_id: aabb(o, assets[o.asset_id]) for o in scene.objects}
    out = []
    for o in scene.objects:
        box = boxes[o.instance_id]
        others = [b for k, b in boxes.items() if k != o.instance_id]
        gap = box[0][2] - support_height(box, others, scene.table_height)
        if abs(gap) > SUPPORT_TOL:
            out.append(SupportViolation(o.instance_id, gap))
    return out


def resting_pose(asset: ObjectAsset, x: float, y: float, surface_z: float, yaw: float = 0.0) -> Pose:
    return Pose.from_xyz_yaw(x, y, surface_z + asset.aabb_half_extents[2], yaw)


def build_scene(task: TaskSpec, library: AssetLibrary, table_height: float = DEFAULT_TABLE_HEIGHT,
                asset_overrides: dict[str, str] | None = None) -> Scene:
    """Clean scene for ``task``: each slot's asset resting on the table at its layout pose."""
    overrides = asset_overrides or {}
    objs = []
    for s in task.slots:
        asset = library.asset(overrides.get(s.slot, s.asset_id))
        objs.append(ObjectInstance(s.instance_id, asset.asset_id,
                                   resting_pose(asset, s.position[0], s.position[1], table_height, s.yaw)))
    return Scene(table_height=table_height, task_objects=tuple(objs))


# --- checker evaluation -------------------------------------------------------

def evaluate_predicate(pred: Predicate, objects: dict[str, ObjectInstance], assets: dict[str, ObjectAsset],
                       holding: dict[str, str | None]) -> bool:
    if isinstance(pred, GripperHolding):
        arms = ("left", "right") if pred.arm == "any" else (pred.arm,)
        held = any(holding.get(a) == pred.obj for a in arms)
        return held != pred.negate
    if isinstance(pred, WithinDistance):
        a, b = objects[pred.a], objects[pred.b]
        pa = world_point(a, assets[a.asset_id].functional_points[pred.a_point].position)
        pb = world_point(b, assets[b.asset_id].functional_points[pred.b_point].position)
        return dist(pa, pb) <= pred.tol
    if isinstance(pred, RelativeX):
        dx = objects[pred.a].pose.position[0] - objects[pred.b].pose.position[0]
        return dx * pred.sign > 0
    if isinstance(pred, OnTopOf):
        a, b = objects[pred.a], objects[pred.b]
        a_lo, _ = aabb(a, assets[a.asset_id])
        b_lo, b_hi = aabb(b, assets[b.asset_id])
        cx, cy = a.pose.position[0], a.pose.position[1]
        inside = b_lo[0] <= cx <= b_hi[0] and b_lo[1] <= cy <= b_hi[1]
        return inside and abs(a_lo[2] - b_hi[2]) <= pred.tol
    raise TypeError(f"unknown predicate {pred!r}")


def evaluate_checker(checker: SuccessChecker, objects, assets, holding) -> bool:
    return all(evaluate_predicate(p, objects, assets, holding) for p in checker.predicates)


# --- manifest I/O ---------------------------------------------------------------

def _vec(v, n: int, what: str):
    if not isinstance(v, (list, tuple)) or len(v) != n:
        raise ManifestError("invalid", f"{what} must be a {n}-element array")
    out = tuple(float(c) for c in v)
    if not all(math.isfinite(c) for c in out):
        raise ManifestError("invalid", f"{what} has non-finite components")
    return out


def _req(d: dict, key: str, where: str):
    if key not in d:
        raise ManifestError("missing_field", f"{where}: {key}")
    return d[key]


def _approaches(values, where: str) -> tuple[str, ...]:
    vals = tuple(values)
    if not vals or any(v not in APPROACHES for v in vals):
        raise ManifestError("invalid", f"{where}: approaches must be a nonempty subset of {APPROACHES}")
    return tuple(a for a in APPROACHES if a in vals)


def _pose(d: dict, where: str) -> Pose:
    pose = Pose(_vec(_req(d, "position", where), 3, f"{where}.position"),
                _vec(d.get("orientation", IDENTITY_QUAT), 4, f"{where}.orientation"))
    if not pose.is_valid(MANIFEST_QUAT_TOL):
        raise ManifestError("bad_quaternion", where)
    return pose


def _asset(d: dict) -> ObjectAsset:
    aid = _req(d, "asset_id", "asset")
    where = f"asset {aid}"
    half = _vec(_req(d, "aabb_half_extents", where), 3, f"{where}.aabb_half_extents")
    if min(half) <= 0:
        raise ManifestError("invalid", f"{where}: half extents must be positive")
    grasps = []
    for k, g in enumerate(_req(d, "grasp_annotations", where)):
        gw = f"{where}.grasp_annotations[{k}]"
        axis = _vec(_req(g, "grasp_axis", gw), 3, f"{gw}.grasp_axis")
        if abs(norm(axis) - 1.0) > MANIFEST_QUAT_TOL:
            raise ManifestError("invalid", f"{gw}: grasp_axis must be a unit vector")
        width = float(_req(g, "required_width", gw))
        if width <= 0:
            raise ManifestError("invalid", f"{gw}: required_width must be positive")
        grasps.append(GraspAnnotation(_vec(_req(g, "grasp_point", gw), 3, f"{gw}.grasp_point"), axis,
                                      _approaches(_req(g, "allowed_approaches", gw), gw), width))
    descriptions = tuple(_req(d, "descriptions", where))
    if not descriptions:
        raise ManifestError("empty_descriptions", where)
    return ObjectAsset(
        asset_id=aid,
        category=_req(d, "category", where),
        aabb_half_extents=half,
        grasp_annotations=tuple(grasps),
        functional_points=tuple(_pose(p, f"{where}.functional_points[{k}]")
                                for k, p in enumerate(d.get("functional_points", []))),
        placement_points=tuple(_pose(p, f"{where}.placement_points[{k}]")
                               for k, p in enumerate(d.get("placement_points", []))),
        descriptions=descriptions,
    )


def _embodiment(d: dict) -> EmbodimentProfile:
    name = _req(d, "name", "embodiment")
    where = f"embodiment {name}"
    emb = EmbodimentProfile(
        name=name,
        left_base=_vec(_req(d, "left_base", where), 3, f"{where}.left_base"),
        right_base=_vec(_req(d, "right_base", where), 3, f"{where}.right_base"),
        reach_radius=float(_req(d, "reach_radius", where)),
        feasible_approaches=_approaches(_req(d, "feasible_approaches", where), where),
        max_gripper_width=float(_req(d, "max_gripper_width", where)),
        dof=int(_req(d, "dof", where)),
    )
    if emb.reach_radius <= 0 or emb.max_gripper_width <= 0 or emb.left_base == emb.right_base:
        raise ManifestError("invalid", f"{where}: needs positive reach/width and distinct bases")
    return emb


_PREDICATES = {
    "within_distance": (WithinDistance, ("a", "a_point", "b", "b_point", "tol")),
    "relative_x": (RelativeX, ("a", "b", "sign")),
    "on_top_of": (OnTopOf, ("a", "b", "tol")),
    "gripper_holding": (GripperHolding, ("arm", "obj", "negate")),
}
_PREDICATE_NAMES = {cls: name for name, (cls, _) in _PREDICATES.items()}


def _predicate(d: dict, where: str) -> Predicate:
    kind = _req(d, "type", where)
    if kind not in _PREDICATES:
        raise ManifestError("invalid", f"{where}: unknown predicate {kind!r}")
    cls, fields_ = _PREDICATES[kind]
    kwargs = {}
    for f in fields_:
        if f == "negate":
            kwargs[f] = bool(d.get(f, False))
        elif f in ("a_point", "b_point", "sign"):
            kwargs[f] = int(_req(d, f, where))
        elif f == "tol":
            kwargs[f] = float(_req(d, f, where))
            if kwargs[f] <= 0:
                raise ManifestError("invalid", f"{where}: tolerances must be positive")
        else:
            kwargs[f] = _req(d, f, where)
    return cls(**kwargs)


def _task(d: dict) -> TaskSpec:
    name = _req(d, "task_name", "task")
    where = f"task {name}"
    slots = []
    for s in _req(d, "slots", where):
        pos = _req(s, "position", where)
        slots.append(Slot(_req(s, "slot", where), _req(s, "instance_id", where), _req(s, "category", where),
                          _req(s, "asset_id", where), (float(pos[0]), float(pos[1])), float(s.get("yaw", 0.0))))
    letters = [s.slot for s in slots]
    if len(set(letters)) != len(letters) or len({s.instance_id for s in slots}) != len(slots):
        raise ManifestError("duplicate", f"{where}: slot letters and instance ids must be unique")
    return TaskSpec(
        task_name=name,
        description=_req(d, "description", where),
        slots=tuple(slots),
        checker=SuccessChecker(tuple(_predicate(p, where) for p in d.get("checker", []))),
        instruction_pool_ref=d.get("instruction_pool", name),
        expert_program=d.get("expert_program"),
        benchmark=bool(d.get("benchmark", True)),
    )


def library_from_json(doc: dict) -> AssetLibrary:
    if not isinstance(doc, dict):
        raise ManifestError("invalid", "manifest must be a JSON object")
    version = _req(doc, "schema_version", "manifest")
    if version != SCHEMA_VERSION:
        raise ManifestError("invalid", f"unsupported schema_version {version!r}")

    def keyed(items, key, build, what):
        out = {}
        for raw in items:
            obj = build(raw)
            k = getattr(obj, key)
            if k in out:
                raise ManifestError("duplicate", f"{what} {k}")
            out[k] = obj
        return out

    assets = keyed(_req(doc, "assets", "manifest"), "asset_id", _asset, "asset_id")
    embodiments = keyed(doc.get("embodiments", []), "name", _embodiment, "embodiment")
    tasks = keyed(doc.get("tasks", []), "task_name", _task, "task")
    for t in tasks.values():
        for s in t.slots:
            if s.asset_id not in assets or assets[s.asset_id].category != s.category:
                raise ManifestError("invalid", f"task {t.task_name}: slot {s.slot} needs a {s.category} asset")
    textures = []
    seen = set()
    for t in doc.get("textures", []):
        entry = TextureEntry(_req(t, "texture_id", "texture"), _req(t, "tag", "texture"))
        if entry.texture_id in seen:
            raise ManifestError("duplicate", f"texture {entry.texture_id}")
        if entry.tag not in TEXTURE_TAGS:
            raise ManifestError("invalid", f"texture {entry.texture_id}: tag must be one of {TEXTURE_TAGS}")
        seen.add(entry.texture_id)
        textures.append(entry)
    return AssetLibrary(assets, embodiments, tasks, tuple(textures))


def load_manifest(path) -> AssetLibrary:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError("invalid", f"{path}: {exc}") from None
    return library_from_json(doc)


def _pose_json(p: Pose) -> dict:
    return p.to_json()


def library_to_json(lib: AssetLibrary) -> dict:
    assets = []
    for aid in sorted(lib.assets):
        a = lib.assets[aid]
        assets.append({
            "asset_id": a.asset_id,
            "category": a.category,
            "aabb_half_extents": list(a.aabb_half_extents),
            "grasp_annotations": [
                {"grasp_point": list(g.grasp_point), "grasp_axis": list(g.grasp_axis),
                 "allowed_approaches": list(g.allowed_approaches), "required_width": g.required_width}
                for g in a.grasp_annotations
            ],
            "functional_points": [_pose_json(p) for p in a.functional_points],
            "placement_points": [_pose_json(p) for p in a.placement_points],
            "descriptions": list(a.descriptions),
        })
    embodiments = [
        {"name": e.name, "left_base": list(e.left_base), "right_base": list(e.right_base),
         "reach_radius": e.reach_radius, "feasible_approaches": list(e.feasible_approaches),
         "max_gripper_width": e.max_gripper_width, "dof": e.dof}
        for e in (lib.embodiments[k] for k in sorted(lib.embodiments))
    ]
    tasks = []
    for name in sorted(lib.tasks):
        t = lib.tasks[name]
        checker = []
        for p in t.checker.predicates:
            d = {"type": _PREDICATE_NAMES[type(p)]}
            d.update({f: getattr(p, f) for f in _PREDICATES[d["type"]][1]})
            checker.append(d)
        td = {
            "task_name": t.task_name, "description": t.description,
            "slots": [{"slot": s.slot, "instance_id": s.instance_id, "category": s.category,
                       "asset_id": s.asset_id, "position": list(s.position), "yaw": s.yaw} for s in t.slots],
            "checker": checker, "instruction_pool": t.instruction_pool_ref, "benchmark": t.benchmark,
        }
        if t.expert_program is not None:
            td["expert_program"] = t.expert_program
        tasks.append(td)
    return {
        "schema_version": SCHEMA_VERSION,
        "assets": assets,
        "embodiments": embodiments,
        "tasks": tasks,
        "textures": [{"texture_id": t.texture_id, "tag": t.tag} for t in lib.textures],
    }


def save_manifest(lib: AssetLibrary, path) -> None:
    Path(path).write_text(canon.dump_document(library_to_json(lib)), encoding="utf-8", newline="\n")


def with_table_height(scene: Scene, height: float) -> Scene:
    """Shift the table and everything resting on it by the same amount."""
    dz = height - scene.table_height
    shift = lambda objs: tuple(replace(o, pose=o.pose.translated((0.0, 0.0, dz))) for o in objs)  # noqa: E731
    return replace(scene, table_height=height, task_objects=shift(scene.task_objects),
                   distractors=shift(scene.distractors))
