"""Scene randomization: clutter, textures, lighting, table height, camera, language.

Every sampler is a pure function of its config and seed. Each axis draws from
its own stream (``rng_for(seed, axis)``) so toggling one axis never shifts the
samples of another.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import canon
from .geometry import quat_from_axis_angle, quat_mul, quat_normalize
from .scene import (
    DEFAULT_TABLE_HEIGHT,
    AssetLibrary,
    LightingSample,
    ObjectInstance,
    Pose,
    Scene,
    TaskSpec,
    TextureEntry,
    aabb_overlap,
    resting_pose,
    with_table_height,
)
from .seeding import rng_for

log = logging.getLogger(__name__)

LIGHT_TYPES = ("point", "directional", "area")


@dataclass(frozen=True)
class LightingBounds:
    color_temperature: tuple[float, float] = (2500.0, 7500.0)
    intensity: tuple[float, float] = (0.2, 2.0)
    position_lo: tuple[float, float, float] = (-1.0, -1.0, 1.5)
    position_hi: tuple[float, float, float] = (1.0, 1.0, 2.5)
    types: tuple[str, ...] = LIGHT_TYPES

    def __post_init__(self):
        pairs = [self.color_temperature, self.intensity, *zip(self.position_lo, self.position_hi)]
        if any(lo > hi for lo, hi in pairs):
            raise ValueError("lighting bounds need lo <= hi")
        if not self.types or any(t not in LIGHT_TYPES for t in self.types):
            raise ValueError(f"light types must be a nonempty subset of {LIGHT_TYPES}")

    def contains(self, s: LightingSample) -> bool:
        ok = self.color_temperature[0] <= s.color_temperature <= self.color_temperature[1]
        ok = ok and self.intensity[0] <= s.intensity <= self.intensity[1]
        ok = ok and all(lo <= c <= hi for c, lo, hi in zip(s.position, self.position_lo, self.position_hi))
        return ok and s.type in self.types


@dataclass(frozen=True)
class RandomizationConfig:
    clutter: bool = True
    textures: bool = True
    lighting: bool = True
    table_height: bool = True
    instructions: bool = True
    camera: bool = True
    clutter_count_range: tuple[int, int] = (2, 5)
    table_height_delta_max: float = 0.03
    camera_delta_max: float = 0.01
    camera_rotation_max_deg: float = 2.0
    lighting_bounds: LightingBounds = field(default_factory=LightingBounds)
    clutter_margin: float = 0.005
    clutter_attempts: int = 100
    # (x_lo, y_lo), (x_hi, y_hi) of the table area distractors may occupy
    clutter_region: tuple[tuple[float, float], tuple[float, float]] = ((-0.45, -0.2), (0.45, 0.35))
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.clutter_count_range
        if lo < 0 or lo > hi:
            raise ValueError("clutter_count_range needs 0 <= lo <= hi")
        if min(self.table_height_delta_max, self.camera_delta_max, self.camera_rotation_max_deg,
               self.clutter_margin) < 0:
            raise ValueError("randomization deltas must be nonnegative")
        if self.clutter_attempts < 1:
            raise ValueError("clutter_attempts must be >= 1")

    @classmethod
    def all_off(cls, **kw) -> "RandomizationConfig":
        flags = dict(clutter=False, textures=False, lighting=False, table_height=False,
                     instructions=False, camera=False)
        flags.update(kw)
        return cls(**flags)

    def to_json(self) -> dict:
        return json.loads(canon.dumps(asdict(self)))

    @property
    def any_enabled(self) -> bool:
        return any((self.clutter, self.textures, self.lighting, self.table_height, self.camera))


# --- samplers ---------------------------------------------------------------

def sample_lighting(cfg: RandomizationConfig, seed: int) -> LightingSample:
    b = cfg.lighting_bounds
    rng = rng_for(seed, "lighting")
    return LightingSample(
        color_temperature=canon.q(rng.uniform(*b.color_temperature)),
        type=rng.choice(b.types),
        intensity=canon.q(rng.uniform(*b.intensity)),
        position=tuple(canon.q(rng.uniform(lo, hi)) for lo, hi in zip(b.position_lo, b.position_hi)),
    )


def sample_table_height(cfg: RandomizationConfig, seed: int, base: float = DEFAULT_TABLE_HEIGHT) -> float:
    d = cfg.table_height_delta_max
    return base + rng_for(seed, "table_height").uniform(-d, d)


def sample_textures(textures, cfg: RandomizationConfig, seed: int) -> tuple[str, str]:
    """Pick one surface and one background texture id from a texture manifest."""
    entries = textures.textures if isinstance(textures, AssetLibrary) else tuple(textures)
    surfaces = sorted(t.texture_id for t in entries if t.tag == "surface")
    backgrounds = sorted(t.texture_id for t in entries if t.tag == "background")
    if not surfaces or not backgrounds:
        raise ValueError("texture manifest needs at least one surface and one background texture")
    rng = rng_for(seed, "textures")
    return rng.choice(surfaces), rng.choice(backgrounds)


def _unit_ball(rng, dim: int = 3) -> tuple[float, ...]:
    # direction uniform on the sphere, radius ~ r^(1/3): uniform in the ball
    g = [rng.gauss(0.0, 1.0) for _ in range(dim)]
    n = math.sqrt(sum(c * c for c in g)) or 1.0
    r = rng.random() ** (1.0 / dim)
    return tuple(c / n * r for c in g)


def perturb_camera(base: Pose, cfg: RandomizationConfig, seed: int) -> Pose:
    """Translate by at most ``camera_delta_max`` and rotate by at most the configured angle."""
    if cfg.camera_delta_max == 0 and cfg.camera_rotation_max_deg == 0:
        return base
    rng = rng_for(seed, "camera")
    offset = tuple(c * cfg.camera_delta_max for c in _unit_ball(rng))
    axis = _unit_ball(rng)
    angle = math.radians(cfg.camera_rotation_max_deg) * rng.random()
    if not any(axis):
        axis = (0.0, 0.0, 1.0)
    turn = quat_from_axis_angle(axis, angle)
    position = tuple(p + o for p, o in zip(base.position, offset))
    return Pose(position, quat_normalize(quat_mul(turn, base.orientation)))


def sample_clutter(scene: Scene, library: AssetLibrary, cfg: RandomizationConfig, seed: int) -> Scene:
    """Insert distractors by rejection sampling on free table area.

    Candidates exclude every category already present among the task objects.
    A distractor that cannot be placed within ``clutter_attempts`` draws is
    skipped; the scene may therefore hold fewer than requested.
    """
    lo, hi = cfg.clutter_count_range
    if hi == 0:
        return scene
    taken = {library.asset(o.asset_id).category for o in scene.task_objects}
    pool = [aid for aid in sorted(library.assets) if library.assets[aid].category not in taken]
    if not pool:
        raise ValueError("no distractor assets remain after category exclusion")
    rng = rng_for(seed, "clutter")
    want = rng.randint(lo, hi)
    placed: list[tuple[ObjectInstance, object]] = [(o, library.asset(o.asset_id)) for o in scene.objects]
    (x_lo, y_lo), (x_hi, y_hi) = cfg.clutter_region
    added = []
    for k in range(want):
        asset = library.asset(rng.choice(pool))
        for _ in range(cfg.clutter_attempts):
            pose = resting_pose(asset, rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi), scene.table_height,
                                rng.uniform(-math.pi, math.pi))
            inst = ObjectInstance(f"distractor_{k}", asset.asset_id, pose.rounded(), True)
            if not any(aabb_overlap((inst, asset), other, cfg.clutter_margin) for other in placed):
                placed.append((inst, asset))
                added.append(inst)
                break
        else:
            log.info("clutter: skipped distractor %d (%s) after %d attempts", k, asset.asset_id,
                     cfg.clutter_attempts)
    return replace(scene, distractors=scene.distractors + tuple(added))


def randomize_scene(scene: Scene, library: AssetLibrary, cfg: RandomizationConfig, seed: int) -> Scene:
    """Apply every enabled non-language axis. Table height goes first so clutter lands on the new top."""
    out = scene
    if cfg.table_height:
        out = with_table_height(out, sample_table_height(cfg, seed, scene.table_height))
    if cfg.clutter:
        out = sample_clutter(out, library, cfg, seed)
    if cfg.lighting:
        out = replace(out, lighting=sample_lighting(cfg, seed))
    if cfg.textures and library.textures:
        out = replace(out, texture_ids=sample_textures(library, cfg, seed))
    if cfg.camera:
        out = replace(out, camera_pose=perturb_camera(out.camera_pose, cfg, seed))
    return out


# --- instructions -------------------------------------------------------------

PLACEHOLDER = re.compile(r"\{([A-Za-z])\}")


class UnboundPlaceholder(KeyError):
    def __init__(self, placeholder: str, template: str):
        self.placeholder = placeholder
        self.template = template
        super().__init__(f"{{{placeholder}}} in {template!r} has no binding")


@dataclass(frozen=True)
class TemplatePool:
    templates: tuple[str, ...]
    train: tuple[int, ...]
    eval: tuple[int, ...]

    def split(self, name: str) -> tuple[int, ...]:
        if name not in ("train", "eval"):
            raise ValueError(f"split must be train or eval, not {name!r}")
        return self.train if name == "train" else self.eval


@dataclass(frozen=True)
class InstructionPools:
    """Instruction templates per task plus train/eval splits of each asset's descriptions."""

    tasks: dict[str, TemplatePool]
    descriptions: dict[str, TemplatePool]  # asset_id -> (asset description texts, splits)

    def validate(self) -> None:
        for owner, pool in [*self.tasks.items(), *self.descriptions.items()]:
            tr, ev = set(pool.train), set(pool.eval)
            if tr & ev:
                raise ValueError(f"{owner}: train and eval splits overlap")
            if any(i < 0 or i >= len(pool.templates) for i in tr | ev):
                raise ValueError(f"{owner}: split index out of range")

    def eval_strings(self) -> tuple[set[str], set[str]]:
        """(eval templates, eval descriptions) across every task and asset."""
        temps = {p.templates[i] for p in self.tasks.values() for i in p.eval}
        descs = {p.templates[i] for p in self.descriptions.values() for i in p.eval}
        return temps, descs


def _pool_json(p: TemplatePool, key: str) -> dict:
    return {key: list(p.templates), "splits": {"train": list(p.train), "eval": list(p.eval)}}


def pools_to_json(pools: InstructionPools) -> dict:
    return {
        "schema_version": 1,
        "tasks": {k: _pool_json(v, "templates") for k, v in sorted(pools.tasks.items())},
        "descriptions": {k: _pool_json(v, "descriptions") for k, v in sorted(pools.descriptions.items())},
    }


def pools_from_json(doc: dict, library: AssetLibrary | None = None) -> InstructionPools:
    def pool(d: dict, key: str, texts=None) -> TemplatePool:
        s = d["splits"]
        return TemplatePool(tuple(texts if texts is not None else d[key]), tuple(s["train"]), tuple(s["eval"]))

    tasks = {k: pool(v, "templates") for k, v in doc["tasks"].items()}
    descriptions = {}
    for aid, v in doc["descriptions"].items():
        texts = v.get("descriptions")
        if texts is None:
            if library is None or aid not in library.assets:
                raise ValueError(f"description split for {aid} needs the asset's descriptions")
            texts = library.asset(aid).descriptions
        descriptions[aid] = pool(v, "descriptions", texts)
    out = InstructionPools(tasks, descriptions)
    out.validate()
    return out


def load_pools(path, library: AssetLibrary | None = None) -> InstructionPools:
    return pools_from_json(json.loads(Path(path).read_text(encoding="utf-8")), library)


def save_pools(pools: InstructionPools, path) -> None:
    Path(path).write_text(canon.dump_document(pools_to_json(pools)), encoding="utf-8", newline="\n")


@dataclass(frozen=True)
class SlotBinding:
    """What fills one slot's placeholders.

    ``description`` is an index into the asset's descriptions, literal text,
    or None to draw from the requested split. ``arm`` names the arm outright;
    otherwise it follows the object's side of the table (``x``).
    """

    asset_id: str | None = None
    description: int | str | None = None
    arm: str | None = None
    x: float | None = None


@dataclass(frozen=True)
class Instruction:
    text: str
    template_index: int | None
    description_indices: dict[str, int | None]
    split: str


def bind_scene(task: TaskSpec, scene: Scene) -> dict[str, SlotBinding]:
    by_id = {o.instance_id: o for o in scene.objects}
    out = {}
    for s in task.slots:
        inst = by_id.get(s.instance_id)
        out[s.slot] = SlotBinding(inst.asset_id if inst else s.asset_id, None, None,
                                  inst.pose.position[0] if inst else s.position[0])
    return out


def _arm_text(b: SlotBinding) -> str | None:
    if b.arm is not None:
        return b.arm if b.arm.endswith(" arm") else f"{b.arm} arm"
    if b.x is not None:
        return "left arm" if b.x < 0 else "right arm"
    return None


def fill_template(template: str, bindings: dict[str, SlotBinding], descriptions: dict[str, str]) -> str:
    def sub(m: re.Match) -> str:
        ch = m.group(1)
        slot = ch.upper()
        if slot not in bindings:
            raise UnboundPlaceholder(ch, template)
        if ch.isupper():
            if slot not in descriptions:
                raise UnboundPlaceholder(ch, template)
            return descriptions[slot]
        text = _arm_text(bindings[slot])
        if text is None:
            raise UnboundPlaceholder(ch, template)
        return text

    return PLACEHOLDER.sub(sub, template)


def compose_instruction(template_pool: TemplatePool | str, pools: InstructionPools | None,
                        bindings: dict[str, SlotBinding], seed: int, split: str = "train") -> Instruction:
    """Draw a template from ``split`` (or use the literal one given) and fill it.

    Each slot's description is the binding's choice or, failing that, a draw
    from the same split of that asset's description pool.
    """
    rng = rng_for(seed, "instruction", split)
    if isinstance(template_pool, str):
        template, t_index = template_pool, None
    else:
        choices = template_pool.split(split)
        if not choices:
            raise ValueError(f"template pool has no {split} split")
        t_index = rng.choice(choices)
        template = template_pool.templates[t_index]
    needed = sorted({m.group(1) for m in PLACEHOLDER.finditer(template) if m.group(1).isupper()})
    texts: dict[str, str] = {}
    indices: dict[str, int | None] = {}
    for slot in needed:
        b = bindings.get(slot)
        if b is None:
            raise UnboundPlaceholder(slot, template)
        if isinstance(b.description, str):
            texts[slot], indices[slot] = b.description, None
            continue
        if pools is None or b.asset_id not in pools.descriptions:
            raise UnboundPlaceholder(slot, template)
        dp = pools.descriptions[b.asset_id]
        k = b.description if b.description is not None else rng.choice(dp.split(split))
        texts[slot], indices[slot] = dp.templates[k], k
    return Instruction(fill_template(template, bindings, texts), t_index, indices, split)


def synthesize_instruction(task: TaskSpec | str, pools: InstructionPools | None,
                           bindings: dict[str, SlotBinding], seed: int, split: str = "train") -> str:
    """Instruction text for a task (or a literal template) under ``bindings``."""
    if isinstance(task, TaskSpec):
        ref = task.instruction_pool_ref or task.task_name
        if pools is None or ref not in pools.tasks:
            raise KeyError(f"no instruction templates for {ref}")
        return compose_instruction(pools.tasks[ref], pools, bindings, seed, split).text
    return compose_instruction(task, pools, bindings, seed, split).text


def enumerate_instruction_count(templates: int, descriptions_per_slot) -> int:
    if templates < 0 or any(d < 0 for d in descriptions_per_slot):
        raise ValueError("counts must be nonnegative")
    return math.prod(descriptions_per_slot, start=templates)


__all__ = [
    "LIGHT_TYPES", "LightingBounds", "RandomizationConfig", "sample_lighting", "sample_table_height",
    "sample_textures", "perturb_camera", "sample_clutter", "randomize_scene", "UnboundPlaceholder",
    "TemplatePool", "InstructionPools", "pools_to_json", "pools_from_json", "load_pools", "save_pools",
    "SlotBinding", "Instruction", "bind_scene", "fill_template", "compose_instruction",
    "synthesize_instruction", "enumerate_instruction_count", "TextureEntry",
]
