"""Expert-episode generation, sharded JSONL export, integrity checks and splits."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import canon
from .dsl import Program, parse_program, render_program
from .randomization import InstructionPools, RandomizationConfig, bind_scene, compose_instruction, randomize_scene
from .scene import AssetLibrary, EmbodimentProfile, TaskSpec, build_scene
from .seeding import label_seed, mix64, rng_for
from .sim import SimConfig, TrialLog, run_trial

DATASET_SCHEMA_VERSION = 1
SHARD_SIZE = 10_000
SPLITS = ("train", "eval")


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeRecord:
    task_name: str
    embodiment: str
    episode_seed: int
    randomization: dict  # RandomizationConfig.to_json() plus the mode
    instruction: str
    program_text: str
    trial_log: TrialLog
    success: bool
    split: str = "train"
    template_index: int | None = None
    description_indices: dict = field(default_factory=dict)
    scene: dict | None = None

    def check(self) -> None:
        if self.success != self.trial_log.success:
            raise ValidationError(f"episode {self.episode_seed}: success flag disagrees with its trial log")
        if not self.instruction:
            raise ValidationError(f"episode {self.episode_seed}: empty instruction")
        if self.split not in SPLITS:
            raise ValidationError(f"episode {self.episode_seed}: bad split {self.split!r}")

    def to_json(self) -> dict:
        return {
            "task_name": self.task_name, "embodiment": self.embodiment, "episode_seed": self.episode_seed,
            "randomization": self.randomization, "instruction": self.instruction,
            "program_text": self.program_text, "trial_log": self.trial_log.to_json(), "success": self.success,
            "split": self.split, "template_index": self.template_index,
            "description_indices": dict(sorted(self.description_indices.items())), "scene": self.scene,
        }

    @classmethod
    def from_json(cls, d: dict) -> "EpisodeRecord":
        rec = cls(d["task_name"], d["embodiment"], int(d["episode_seed"]), d["randomization"], d["instruction"],
                  d["program_text"], TrialLog.from_json(d["trial_log"]), bool(d["success"]), d["split"],
                  d.get("template_index"), dict(d.get("description_indices") or {}), d.get("scene"))
        rec.check()
        return rec


def _normalized(doc):
    # values exactly as they come back from disk, so records compare equal after a round trip
    return json.loads(canon.dumps(doc))


def generate_episodes(task: TaskSpec, library: AssetLibrary, emb: EmbodimentProfile, pools: InstructionPools | None,
                      n: int, *, mode: str = "easy", seed: int = 0, program: Program | str | None = None,
                      randomization: RandomizationConfig | None = None, sim_cfg: SimConfig | None = None,
                      eval_fraction: float = 0.1) -> list[EpisodeRecord]:
    """Roll out ``program`` (the task's expert program by default) ``n`` times.

    Episode ``e`` uses seed ``mix64(seed, task label, e)`` for its scene,
    instruction and trial. Hard mode randomizes every scene axis; a seeded
    ``eval_fraction`` of episodes draw their language from the eval pools.
    """
    if mode not in ("easy", "hard"):
        raise ValueError("mode must be easy or hard")
    if program is None:
        if task.expert_program is None:
            raise ValueError(f"task {task.task_name} has no expert program")
        program = task.expert_program
    prog = parse_program(program) if isinstance(program, str) else program
    text = render_program(prog)
    rcfg = randomization or RandomizationConfig()
    snap = _normalized({"mode": mode, **rcfg.to_json()})
    base = build_scene(task, library)
    out = []
    for e in range(n):
        ep_seed = mix64(seed, label_seed(task.task_name), e)
        scene = randomize_scene(base, library, rcfg, ep_seed) if mode == "hard" else base
        split = "eval" if rng_for(ep_seed, "split").random() < eval_fraction else "train"
        if pools is not None and (task.instruction_pool_ref or task.task_name) in pools.tasks:
            ins = compose_instruction(pools.tasks[task.instruction_pool_ref or task.task_name], pools,
                                      bind_scene(task, scene), ep_seed, split)
            instruction, t_index, d_index = ins.text, ins.template_index, ins.description_indices
        else:
            instruction, t_index, d_index = task.description, None, {}
        log = run_trial(prog, scene, library, emb, sim_cfg, ep_seed, checker=task.checker)
        out.append(EpisodeRecord(task.task_name, emb.name, ep_seed, snap, instruction, text, log, log.success,
                                 split, t_index, d_index, _normalized(scene.to_json())))
    return out


def split_train_eval(records, pools: InstructionPools, library: AssetLibrary | None = None,
                     tasks: dict[str, TaskSpec] | None = None) -> list[EpisodeRecord]:
    """Label each record eval iff its template or any description came from an eval pool.

    Description indices are looked up in the pool of the asset bound to the
    slot; that needs the episode's scene (stored on the record) and the task's
    slot map from ``tasks`` or ``library``.
    """
    task_map = tasks if tasks is not None else (library.tasks if library is not None else {})
    out = []
    for r in records:
        task = task_map.get(r.task_name)
        ref = (task.instruction_pool_ref or task.task_name) if task else r.task_name
        is_eval = False
        tp = pools.tasks.get(ref)
        if r.template_index is not None and tp is not None and r.template_index in tp.eval:
            is_eval = True
        for slot, k in r.description_indices.items():
            if k is None:
                continue
            aid = _slot_asset(r, task, slot)
            dp = pools.descriptions.get(aid) if aid else None
            if dp is not None and k in dp.eval:
                is_eval = True
        out.append(replace(r, split="eval" if is_eval else "train"))
    return out


def _slot_asset(r: EpisodeRecord, task: TaskSpec | None, slot: str) -> str | None:
    if task is None:
        return None
    try:
        s = task.slot(slot)
    except KeyError:
        return None
    for o in (r.scene or {}).get("task_objects", []):
        if o["instance_id"] == s.instance_id:
            return o["asset_id"]
    return s.asset_id


# --- export / import ---------------------------------------------------------------

@dataclass(frozen=True)
class ShardEntry:
    name: str
    episodes: int
    sha256: str


@dataclass(frozen=True)
class DatasetManifest:
    schema_version: int
    total: int
    counts: dict  # task -> split -> {"success": n, "failure": n}
    files: tuple[ShardEntry, ...]

    def to_json(self) -> dict:
        return {"schema_version": self.schema_version, "total": self.total, "counts": self.counts,
                "files": [{"name": f.name, "episodes": f.episodes, "sha256": f.sha256} for f in self.files]}

    @classmethod
    def from_json(cls, d: dict) -> "DatasetManifest":
        return cls(d["schema_version"], d["total"], d["counts"],
                   tuple(ShardEntry(f["name"], f["episodes"], f["sha256"]) for f in d["files"]))


def _counts(records) -> dict:
    out: dict = {}
    for r in records:
        per = out.setdefault(r.task_name, {s: {"failure": 0, "success": 0} for s in SPLITS})
        per[r.split]["success" if r.success else "failure"] += 1
    return {k: out[k] for k in sorted(out)}


def export_episodes(records, directory, shard_size: int = SHARD_SIZE) -> DatasetManifest:
    """Write ``episodes_<k>.jsonl`` shards in record order, then ``manifest.json``."""
    if shard_size < 1:
        raise ValueError("shard_size must be >= 1")
    records = list(records)
    for r in records:
        r.check()
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    files = []
    for k, start in enumerate(range(0, len(records), shard_size)):
        chunk = records[start:start + shard_size]
        data = canon.dump_lines(r.to_json() for r in chunk).encode("utf-8")
        name = f"episodes_{k}.jsonl"
        (root / name).write_bytes(data)
        files.append(ShardEntry(name, len(chunk), hashlib.sha256(data).hexdigest()))
    manifest = DatasetManifest(DATASET_SCHEMA_VERSION, len(records), _counts(records), tuple(files))
    (root / "manifest.json").write_text(canon.dump_document(manifest.to_json()), encoding="utf-8", newline="\n")
    return manifest


def load_manifest(directory) -> DatasetManifest:
    return DatasetManifest.from_json(json.loads((Path(directory) / "manifest.json").read_text(encoding="utf-8")))


def import_episodes(directory) -> list[EpisodeRecord]:
    root = Path(directory)
    out = []
    for f in load_manifest(root).files:
        for line in (root / f.name).read_text(encoding="utf-8").splitlines():
            if line:
                out.append(EpisodeRecord.from_json(json.loads(line)))
    return out


@dataclass
class DatasetReport:
    violations: list[str] = field(default_factory=list)
    episodes: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_dataset(directory) -> DatasetReport:
    """Check digests, per-shard and total counts, and every line's schema. Never raises."""
    root = Path(directory)
    report = DatasetReport()
    try:
        manifest = load_manifest(root)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        report.violations.append(f"manifest: unreadable ({exc})")
        return report
    records = []
    for f in manifest.files:
        path = root / f.name
        try:
            data = path.read_bytes()
        except OSError:
            report.violations.append(f"{f.name}: missing")
            continue
        if hashlib.sha256(data).hexdigest() != f.sha256:
            report.violations.append(f"{f.name}: digest mismatch")
        lines = [ln for ln in data.decode("utf-8", errors="replace").split("\n") if ln]
        if len(lines) != f.episodes:
            report.violations.append(f"{f.name}: {len(lines)} lines, manifest says {f.episodes}")
        for i, line in enumerate(lines, 1):
            try:
                records.append(EpisodeRecord.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                report.violations.append(f"{f.name}:{i}: bad record ({exc})")
    report.episodes = len(records)
    if manifest.total != sum(f.episodes for f in manifest.files) or manifest.total != len(records):
        report.violations.append(f"manifest: total {manifest.total}, found {len(records)} episodes")
    if manifest.counts != _counts(records):
        report.violations.append("manifest: per-task counts do not match the shards")
    return report
