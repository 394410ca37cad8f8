"""Command-line entry point: ``twinforge <command> [options]``.

Exit codes: 0 completed, 1 domain-negative result, 2 usage or environment error.
Machine-readable outputs go to files; stdout carries short summaries.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import canon
from .agents import BackendError, HttpChat, RuleBasedObserver, ScriptedBackend
from .bench import BenchConfig, ExpertPolicy, ExpertStepPolicy, run_benchmark
from .dataset import export_episodes, generate_episodes
from .dsl import ParseError, parse_program, validate_program
from .metrics import compute_metrics, percent
from .orchestrator import AbortedRun, LoopConfig, Terminal, find_runs, load_run, run_refinement_loop
from .randomization import RandomizationConfig, load_pools, randomize_scene
from .scene import ManifestError, build_scene, load_manifest
from .sim import SimConfig, run_batch
from .toy import DEFAULT_EMBODIMENT, manifest_path, pools_path


class UsageError(Exception):
    """Bad flags, missing files, unknown names: exit code 2."""


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file of option defaults (flags win)")
    p.add_argument("--manifest", help="asset/task manifest (default: bundled toy suite)")
    p.add_argument("--pools", help="instruction pools file (default: bundled toy pools)")
    p.add_argument("--run-dir", default="runs", help="root for run outputs (default: runs)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallel", type=int, default=1, help="worker threads; outputs do not depend on it")
    p.add_argument("--emb", default=DEFAULT_EMBODIMENT, help="embodiment name")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="twinforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check a program against a task scene")
    p.add_argument("program", help="path to a .dsl program")
    p.add_argument("--task", help="task whose scene supplies object names (default: the program's task)")

    p = sub.add_parser("run", parents=[common], help="execute a program M times")
    p.add_argument("task")
    p.add_argument("--program", help="program file (default: the task's expert program)")
    p.add_argument("--mode", choices=("easy", "hard"), default="easy")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--out", help="trial log JSONL (default: <run-dir>/<task>/trials.jsonl)")

    p = sub.add_parser("refine", parents=[common], help="run the generate/execute/repair loop")
    p.add_argument("task", nargs="?", help="task name (default: every benchmark task)")
    p.add_argument("--backend", choices=("oracle", "scripted", "http"), default="oracle")
    p.add_argument("--responses", help="scripted backend: JSON list of replies, or a directory of *.txt replies")
    p.add_argument("--observer", choices=("rule", "http"), default="rule")
    p.add_argument("--endpoint")
    p.add_argument("--model", default="default")
    p.add_argument("--max-refine", type=int, default=5)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--run-id", help="run directory name (default: seed-<seed>)")

    p = sub.add_parser("gen-data", parents=[common], help="roll out expert programs into a dataset")
    p.add_argument("--task", action="append", help="task to include (repeatable; default: benchmark tasks)")
    p.add_argument("--episodes", type=int, default=100, help="total episodes, spread evenly over tasks")
    p.add_argument("--mode", choices=("easy", "hard"), default="hard")
    p.add_argument("--out", default="dataset")
    p.add_argument("--from-runs", help="use final programs of SUCCEEDED runs under this directory")
    p.add_argument("--shard-size", type=int, default=10_000)

    p = sub.add_parser("bench", parents=[common], help="score a policy under Easy or Hard conditions")
    p.add_argument("--policy", choices=("expert", "expert-step"), default="expert")
    p.add_argument("--mode", choices=("easy", "hard"), default="easy")
    p.add_argument("--rollouts", type=int, default=100)
    p.add_argument("--task", action="append")
    p.add_argument("--out", help="JSON report path")

    p = sub.add_parser("metrics", parents=[common], help="aggregate refinement runs")
    p.add_argument("runs_dir")
    p.add_argument("--out", help="JSON report path (default: <runs_dir>/metrics.json)")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"config {args.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"config {args.config}: expected a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = subparsers.choices[args.command]
    known = {a.dest for a in sp._actions}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"config {args.config}: unknown keys {unknown}")
    sp.set_defaults(**cfg)
    return parser.parse_args(argv)


# --- helpers ---------------------------------------------------------------------------

def _library(args):
    try:
        return load_manifest(args.manifest or manifest_path())
    except (OSError, ManifestError) as exc:
        raise UsageError(f"manifest: {exc}") from None


def _pools(args, library):
    try:
        return load_pools(args.pools or pools_path(), library)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"pools: {exc}") from None


def _emb(args, library):
    if args.emb not in library.embodiments:
        raise UsageError(f"unknown embodiment {args.emb!r}; choose from {', '.join(sorted(library.embodiments))}")
    return library.embodiments[args.emb]


def _task(library, name):
    if name not in library.tasks:
        raise UsageError(f"unknown task {name!r}; choose from {', '.join(sorted(library.tasks))}")
    return library.tasks[name]


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _workers(args) -> int:
    if args.parallel < 1:
        raise UsageError("--parallel must be >= 1")
    return args.parallel


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


# --- commands --------------------------------------------------------------------------

def cmd_validate(args) -> int:
    library = _library(args)
    source = _read(args.program)
    try:
        program = parse_program(source)
    except ParseError as exc:
        raise UsageError(f"{args.program}: {exc}") from None
    task = _task(library, args.task or program.task_name)
    emb = library.embodiments.get(args.emb)
    issues = validate_program(program, build_scene(task, library).object_names(), emb)
    for issue in issues:
        print(issue)
    return 1 if issues else 0


def cmd_run(args) -> int:
    library = _library(args)
    task = _task(library, args.task)
    emb = _emb(args, library)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    source = _read(args.program) if args.program else task.expert_program
    if source is None:
        raise UsageError(f"task {task.task_name} has no expert program; pass --program")
    try:
        program = parse_program(source)
    except ParseError as exc:
        raise UsageError(f"program: {exc}") from None
    scene = build_scene(task, library)
    if args.mode == "hard":
        scene = randomize_scene(scene, library, RandomizationConfig(), args.seed)
    logs = run_batch(program, scene, library, emb, SimConfig(), args.seed, args.trials, checker=task.checker,
                     workers=_workers(args))
    out = Path(args.out) if args.out else Path(args.run_dir) / task.task_name / "trials.jsonl"
    _write(out, canon.dump_lines(lg.to_json() for lg in logs))
    k = sum(lg.success for lg in logs)
    print(f"R = {k}/{args.trials}")
    unexecutable = all(lg.failure_cause is not None and lg.failure_cause.value == "UNEXECUTABLE" for lg in logs)
    return 1 if unexecutable else 0


def _scripted_responses(path) -> list[str]:
    p = Path(path)
    if p.is_dir():
        return [f.read_text(encoding="utf-8") for f in sorted(p.glob("*.txt"))]
    try:
        data = json.loads(_read(p))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
        raise UsageError(f"{path}: expected a JSON list of strings")
    return data


def _generator(args, task, run_root: Path):
    if args.backend == "oracle":
        if task.expert_program is None:
            raise UsageError(f"task {task.task_name} has no expert program for the oracle backend")
        return ScriptedBackend([f"```\n{task.expert_program}```\n"])
    if args.backend == "scripted":
        if not args.responses:
            raise UsageError("--backend scripted needs --responses")
        return ScriptedBackend(_scripted_responses(args.responses))
    return _http(args, run_root)


def _http(args, run_root: Path) -> HttpChat:
    try:
        return HttpChat(args.endpoint, args.model, audit_path=run_root / "agent_audit.jsonl")
    except BackendError as exc:
        raise UsageError(str(exc)) from None


def cmd_refine(args) -> int:
    library = _library(args)
    emb = _emb(args, library)
    names = [args.task] if args.task else library.benchmark_tasks()
    try:
        cfg = LoopConfig(M=args.trials, max_refinements=args.max_refine, tau=args.tau, run_seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run_id = args.run_id or f"seed-{args.seed}"
    for name in names:
        task = _task(library, name)
        root = Path(args.run_dir) / name / run_id
        generator = _generator(args, task, root)
        observer = RuleBasedObserver() if args.observer == "rule" else _http(args, root)
        try:
            run = run_refinement_loop(task, library, emb, generator, observer, cfg, run_dir=root,
                                      workers=_workers(args))
        except AbortedRun as exc:
            print(f"{name}: aborted: {exc}", file=sys.stderr)
            return 2
        print(f"{name}: {run.terminal.value} after {len(run.iterations)} iteration(s), "
              f"R = {run.final.successes}/{cfg.M}, CR-Iter {run.cr_iter_contribution}")
    return 0


def cmd_gen_data(args) -> int:
    library = _library(args)
    emb = _emb(args, library)
    pools = _pools(args, library)
    names = args.task or library.benchmark_tasks()
    if args.episodes < 0:
        raise UsageError("--episodes must be >= 0")
    programs = {}
    if args.from_runs:
        if not Path(args.from_runs).is_dir():
            raise UsageError(f"{args.from_runs}: not a directory")
        for d in find_runs(args.from_runs):
            run = load_run(d)
            if run.terminal is Terminal.SUCCEEDED and run.final.program is not None:
                programs.setdefault(run.task_name, run.final.program)
    tasks = [_task(library, n) for n in names]
    if args.from_runs:
        for t in tasks:
            if t.task_name not in programs:
                print(f"{t.task_name}: no succeeded run found, skipped", file=sys.stderr)
        tasks = [t for t in tasks if t.task_name in programs]
    records = []
    for i, task in enumerate(tasks):
        share = args.episodes // len(tasks) + (i < args.episodes % len(tasks))
        records += generate_episodes(task, library, emb, pools, share, mode=args.mode, seed=args.seed,
                                     program=programs.get(task.task_name))
    manifest = export_episodes(records, args.out, args.shard_size)
    ok = sum(r.success for r in records)
    print(f"{manifest.total} episodes ({ok} successful) in {len(manifest.files)} shard(s) under {args.out}")
    return 0 if records else 1


def cmd_bench(args) -> int:
    library = _library(args)
    emb = _emb(args, library)
    pools = _pools(args, library)
    names = args.task or library.benchmark_tasks()
    for n in names:
        _task(library, n)
    policy = ExpertPolicy() if args.policy == "expert" else ExpertStepPolicy(library)
    try:
        cfg = BenchConfig(mode=args.mode, rollouts_per_task=args.rollouts, seed=args.seed, workers=_workers(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = run_benchmark(names, library, emb, policy, cfg, pools)
    if args.out:
        _write(Path(args.out), canon.dump_document(result.to_json()))
    sys.stdout.write(result.to_text())
    return 0


def cmd_metrics(args) -> int:
    root = Path(args.runs_dir)
    if not root.is_dir():
        raise UsageError(f"{root}: not a directory")
    dirs = find_runs(root)
    if not dirs:
        print(f"no runs under {root}")
        return 1
    try:
        report = compute_metrics([load_run(d) for d in dirs])
    except (ValueError, KeyError) as exc:
        raise UsageError(f"metrics: {exc}") from None
    out = Path(args.out) if args.out else root / "metrics.json"
    _write(out, canon.dump_document(report.to_json()))
    sys.stdout.write(report.to_text())
    print(f"ASR {percent(report.ASR)}")
    return 0


COMMANDS = {"validate": cmd_validate, "run": cmd_run, "refine": cmd_refine, "gen-data": cmd_gen_data,
            "bench": cmd_bench, "metrics": cmd_metrics}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"twinforge: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return exc.code if isinstance(exc.code, int) else 2


if __name__ == "__main__":
    sys.exit(main())
