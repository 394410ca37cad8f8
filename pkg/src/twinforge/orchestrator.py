"""Generate, execute, diagnose, repair: the closed refinement loop and its run records."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import canon
from .agents import (
    CodeAgentInput,
    Diagnosis,
    GenerationBackend,
    GenerationError,
    ObserverError,
    RuleBasedObserver,
    agent_input,
    build_repair_prompt,
    diagnose,
    extract_code,
    generate_program,
    observe,
)
from .dsl import Program, count_lexer_tokens, parse_program, render_program
from .scene import AssetLibrary, EmbodimentProfile, Scene, TaskSpec, build_scene
from .sim import SimConfig, TrialLog, run_batch, trace_trial, trial_seed, unexecutable_log

RUN_SCHEMA_VERSION = 1


class Terminal(str, enum.Enum):
    SUCCEEDED = "SUCCEEDED"
    BUDGET_EXHAUSTED = "BUDGET_EXHAUSTED"


@dataclass(frozen=True)
class LoopConfig:
    M: int = 10
    max_refinements: int = 5
    tau: float = 0.5
    run_seed: int = 0

    def __post_init__(self):
        if self.M < 1 or self.max_refinements < 0 or not 0 < self.tau <= 1:
            raise ValueError("LoopConfig needs M >= 1, max_refinements >= 0 and 0 < tau <= 1")

    @property
    def required_successes(self) -> int:
        """Smallest success count that meets tau, computed exactly."""
        return math.ceil(Fraction(str(self.tau)) * self.M)


@dataclass(frozen=True)
class IterationRecord:
    iteration_index: int
    program_text: str
    trial_logs: tuple[TrialLog, ...]
    diagnosis: Diagnosis | None
    token_count: int

    @property
    def successes(self) -> int:
        return sum(lg.success for lg in self.trial_logs)

    @property
    def R(self) -> Fraction:
        return Fraction(self.successes, len(self.trial_logs))

    @property
    def program(self) -> Program | None:
        try:
            return parse_program(self.program_text)
        except Exception:
            return None


@dataclass(frozen=True)
class RefinementRun:
    task_name: str
    iterations: tuple[IterationRecord, ...]
    terminal: Terminal
    cr_iter_contribution: int
    config: LoopConfig = LoopConfig()

    @property
    def final(self) -> IterationRecord:
        return self.iterations[-1]


class AbortedRun(RuntimeError):
    def __init__(self, reason: str, partial: RefinementRun | None):
        self.partial = partial
        super().__init__(reason)


def _program_text(program: Program | None, raw: str) -> str:
    return render_program(program) if program is not None else raw


def run_refinement_loop(task: TaskSpec, library: AssetLibrary, emb: EmbodimentProfile,
                        generator: GenerationBackend, observer=None, cfg: LoopConfig | None = None,
                        sim_cfg: SimConfig | None = None, scene: Scene | None = None,
                        run_dir=None, workers: int = 1) -> RefinementRun:
    """Run the loop to its terminal state.

    Iteration 1 is the first generation. The scene is rebuilt from the same
    template every iteration, and trial seeds depend only on ``run_seed`` and
    the trial index, so programs are compared on identical worlds. Code
    that fails to parse or validate scores M unexecutable trials.

    A backend that fails outright (after its own retries), or a generator
    raising anything unexpected, aborts the run; the partial run is persisted
    to ``run_dir`` when one is given.
    """
    cfg = cfg or LoopConfig()
    scene = scene if scene is not None else build_scene(task, library)
    base_inp = agent_input(task.task_name, task.description, scene.object_names())
    inp: CodeAgentInput = base_inp
    need = cfg.required_successes
    iterations: list[IterationRecord] = []
    budget = 1 + cfg.max_refinements
    for k in range(1, budget + 1):
        try:
            program = generate_program(generator, inp, emb)
            raw, issues = _program_text(program, ""), ()
        except GenerationError as exc:
            if exc.stage == "backend":
                _abort(task, iterations, cfg, need, run_dir, k, exc)
            program, raw, issues = None, extract_code(exc.raw_text), tuple(exc.issues)
        except Exception as exc:
            _abort(task, iterations, cfg, need, run_dir, k, exc)
        if program is not None:
            logs = run_batch(program, scene, library, emb, sim_cfg, cfg.run_seed, cfg.M,
                             checker=task.checker, workers=workers)
        else:
            logs = [unexecutable_log(j, trial_seed(cfg.run_seed, j), issues, emb) for j in range(cfg.M)]
        successes = sum(lg.success for lg in logs)
        diag = None
        if successes < need:
            diag = _diagnose(observer, logs, program, scene, library, emb, sim_cfg, task, issues)
        iterations.append(IterationRecord(k, raw, tuple(logs), diag, count_lexer_tokens(raw)))
        if diag is None:
            break
        inp = build_repair_prompt(base_inp, program if program is not None else raw, diag)
    run = _finish(task, iterations, cfg, need)
    if run_dir is not None:
        persist_run(run, run_dir)
    return run


def _abort(task, iterations, cfg, need, run_dir, k, exc):
    partial = _finish(task, iterations, cfg, need) if iterations else None
    if partial is not None and run_dir is not None:
        persist_run(partial, run_dir)
    raise AbortedRun(f"generator failed at iteration {k}: {exc}", partial) from exc


def _diagnose(observer, logs, program, scene, library, emb, sim_cfg, task, issues) -> Diagnosis:
    snapshots = None
    if observer is not None and not isinstance(observer, RuleBasedObserver) and program is not None:
        first_bad = min((lg for lg in logs if not lg.success), key=lambda lg: lg.trial_index)
        _, snapshots = trace_trial(program, scene, library, emb, sim_cfg, first_bad.seed,
                                   checker=task.checker, trial_index=first_bad.trial_index)
    try:
        report = observe(observer, logs, snapshots, program)
    except ObserverError:
        report = observe(None, logs, snapshots, program)
    return diagnose(logs, report, issues)


def _finish(task: TaskSpec, iterations: list[IterationRecord], cfg: LoopConfig, need: int) -> RefinementRun:
    for rec in iterations:
        if rec.successes >= need:
            return RefinementRun(task.task_name, tuple(iterations), Terminal.SUCCEEDED, rec.iteration_index, cfg)
    return RefinementRun(task.task_name, tuple(iterations), Terminal.BUDGET_EXHAUSTED, 1 + cfg.max_refinements, cfg)


# --- persistence ------------------------------------------------------------------

def _config_json(cfg: LoopConfig) -> dict:
    return {"M": cfg.M, "max_refinements": cfg.max_refinements, "tau": cfg.tau, "run_seed": cfg.run_seed}


def persist_run(run: RefinementRun, directory) -> Path:
    """Write ``iter_<k>/{program.dsl,trials.jsonl,diagnosis.json}`` then ``manifest.json``."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for rec in run.iterations:
        d = root / f"iter_{rec.iteration_index}"
        d.mkdir(exist_ok=True)
        (d / "program.dsl").write_text(rec.program_text, encoding="utf-8", newline="\n")
        (d / "trials.jsonl").write_text(canon.dump_lines(lg.to_json() for lg in rec.trial_logs),
                                        encoding="utf-8", newline="\n")
        diag = rec.diagnosis.to_json() if rec.diagnosis is not None else None
        (d / "diagnosis.json").write_text(canon.dump_document(diag), encoding="utf-8", newline="\n")
        entries.append({"iteration_index": rec.iteration_index, "dir": d.name, "successes": rec.successes,
                        "trials": len(rec.trial_logs), "token_count": rec.token_count})
    manifest = {"schema_version": RUN_SCHEMA_VERSION, "task_name": run.task_name, "terminal": run.terminal.value,
                "cr_iter_contribution": run.cr_iter_contribution, "config": _config_json(run.config),
                "iterations": entries}
    path = root / "manifest.json"
    path.write_text(canon.dump_document(manifest), encoding="utf-8", newline="\n")
    return path


def load_run(directory) -> RefinementRun:
    root = Path(directory)
    m = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    if m.get("schema_version") != RUN_SCHEMA_VERSION:
        raise ValueError(f"{root}: unsupported run schema {m.get('schema_version')!r}")
    c = m["config"]
    cfg = LoopConfig(M=c["M"], max_refinements=c["max_refinements"], tau=c["tau"], run_seed=c["run_seed"])
    iterations = []
    for e in m["iterations"]:
        d = root / e["dir"]
        logs = tuple(TrialLog.from_json(json.loads(line))
                     for line in (d / "trials.jsonl").read_text(encoding="utf-8").splitlines() if line)
        diag_doc = json.loads((d / "diagnosis.json").read_text(encoding="utf-8"))
        iterations.append(IterationRecord(e["iteration_index"], (d / "program.dsl").read_text(encoding="utf-8"),
                                          logs, Diagnosis.from_json(diag_doc) if diag_doc else None,
                                          e["token_count"]))
    return RefinementRun(m["task_name"], tuple(iterations), Terminal(m["terminal"]), m["cr_iter_contribution"], cfg)


def find_runs(root) -> list[Path]:
    """Every run directory (one holding manifest.json with a task_name) under ``root``, sorted."""
    out = []
    for p in sorted(Path(root).rglob("manifest.json")):
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            continue
        if isinstance(doc, dict) and "task_name" in doc and "iterations" in doc:
            out.append(p.parent)
    return out
