"""Code-generation and observer agents behind a pluggable chat backend.

A backend turns a list of ``(role, text)`` turns into one reply. Two ship
here: :class:`ScriptedBackend` replays canned replies (fully deterministic)
and :class:`HttpChat` talks to a chat-completions style HTTP service.
"""

from __future__ import annotations

import enum
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx

from . import canon
from .dsl import ParseError, Program, describe_api, parse_program, render_program, validate_program
from .scene import EmbodimentProfile
from .sim import FailureCause, TrialLog

log = logging.getLogger(__name__)

Turn = tuple[str, str]

ENV_KEY = "TWINFORGE_API_KEY"
ENV_BASE = "TWINFORGE_API_BASE"
REFUSAL = "I have no further program to offer."
PROMPT_VERSION = "v1"


class GenerationBackend(Protocol):
    def complete(self, turns: list[Turn]) -> str: ...


class BackendError(RuntimeError):
    """The backend could not produce a reply (after any retries)."""


class ScriptedBackend:
    """Replays ``responses`` in order, one per call, then refuses forever."""

    def __init__(self, responses, refusal: str = REFUSAL):
        self.responses = list(responses)
        self.refusal = refusal
        self.prompts: list[list[Turn]] = []
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return len(self.prompts)

    def complete(self, turns: list[Turn]) -> str:
        with self._lock:
            k = len(self.prompts)
            self.prompts.append(list(turns))
        return self.responses[k] if k < len(self.responses) else self.refusal


_RETRYABLE = {408, 409, 425, 429, 500, 502, 503, 504}


class HttpChat:
    """Chat-completions client with bounded retries and exponential backoff.

    A call never takes longer than roughly ``timeout * (retries + 1)`` plus
    the backoff sleeps. Every exchange is appended to ``audit_path`` as JSON
    with the API key redacted.
    """

    def __init__(self, endpoint: str | None = None, model_name: str = "default", temperature: float = 0.0,
                 max_tokens: int = 2048, timeout: float = 60.0, retries: int = 3, backoff_base: float = 0.5,
                 api_key: str | None = None, audit_path=None, transport: httpx.BaseTransport | None = None,
                 sleep=time.sleep, max_in_flight: int = 4):
        base = endpoint or os.environ.get(ENV_BASE)
        if not base:
            raise BackendError(f"no endpoint configured (pass one or set {ENV_BASE})")
        self.endpoint = base if base.rstrip("/").endswith("/chat/completions") else base.rstrip("/") + "/chat/completions"
        self.model_name = model_name
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.timeout = timeout
        if retries < 0:
            raise ValueError("retries must be >= 0")
        self.retries = retries
        self.backoff_base = backoff_base
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_KEY)
        self.audit_path = Path(audit_path) if audit_path else None
        self._sleep = sleep
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._audit_lock = threading.Lock()

    def close(self) -> None:
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _redact(self, text: str) -> str:
        return text.replace(self.api_key, "<redacted>") if self.api_key else text

    def _audit(self, entry: dict) -> None:
        if self.audit_path is None:
            return
        line = self._redact(json.dumps(entry, sort_keys=True, ensure_ascii=False))
        with self._audit_lock:
            self.audit_path.parent.mkdir(parents=True, exist_ok=True)
            with self.audit_path.open("a", encoding="utf-8", newline="\n") as fh:
                fh.write(line + "\n")

    def request_body(self, turns: list[Turn]) -> dict:
        return {"model": self.model_name, "temperature": self.temperature, "max_tokens": self.max_tokens,
                "messages": [{"role": r, "content": t} for r, t in turns]}

    def complete(self, turns: list[Turn]) -> str:
        body = self.request_body(turns)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last = "no attempt made"
        with self._gate:
            for attempt in range(self.retries + 1):
                if attempt:
                    self._sleep(self.backoff_base * 2 ** (attempt - 1))
                try:
                    resp = self._client.post(self.endpoint, json=body, headers=headers)
                except httpx.HTTPError as exc:
                    last = f"{type(exc).__name__}: {exc}"
                    self._audit({"attempt": attempt, "request": body, "error": last})
                    continue
                self._audit({"attempt": attempt, "request": body, "status": resp.status_code,
                             "response": resp.text})
                if resp.status_code in _RETRYABLE:
                    last = f"HTTP {resp.status_code}"
                    continue
                if resp.status_code >= 400:
                    raise BackendError(f"HTTP {resp.status_code}: {self._redact(resp.text[:200])}")
                try:
                    return resp.json()["choices"][0]["message"]["content"]
                except (ValueError, KeyError, IndexError, TypeError):
                    raise BackendError("reply is not a chat-completions payload") from None
        raise BackendError(f"gave up after {self.retries + 1} attempts ({last})")


# --- code generation ------------------------------------------------------------

CONSTRAINTS = (
    "1. Output",
    "1.1 Reply with exactly one fenced code block containing the whole program.",
    "1.2 The first line is `task <name>`; one statement per line.",
    "2. Objects and arms",
    "2.1 Refer only to the scene objects listed above.",
    "2.2 Use arm_for(obj) to pick the arm on the object's side of the table.",
    "2.3 Inside together { ... | ... } each branch drives a different arm.",
    "3. Units",
    "3.1 Distances are meters; decimals use at most 6 fractional digits.",
)

EXAMPLE_CALLS = (
    "arm a = arm_for(cup)",
    "grasp(a, cup, pre=0.1, depth=0.0)",
    "move_by(a, dz=0.05)",
    "place(a, cup, target=fp(tray, 0), fp=0, pre=0.1, constrain=free)",
    "open(a)",
    "together { grasp(left, box_l)\n| grasp(right, box_r)\n}",
)


@dataclass(frozen=True)
class CodeAgentInput:
    task_name: str
    description: str
    api_list: tuple[str, ...]
    example_calls: tuple[str, ...] = EXAMPLE_CALLS
    constraints: tuple[str, ...] = CONSTRAINTS
    scene_objects: tuple[str, ...] = ()
    feedback: str | None = None

    def __post_init__(self):
        if not self.api_list:
            raise ValueError("api_list must not be empty")


def agent_input(task_name: str, description: str, scene_objects) -> CodeAgentInput:
    return CodeAgentInput(task_name, description, tuple(describe_api()), scene_objects=tuple(sorted(scene_objects)))


def render_prompt(inp: CodeAgentInput) -> list[Turn]:
    system = ("You write robot task programs in a small skill language. "
              f"Prompt format {PROMPT_VERSION}.")
    parts = [
        f"Task: {inp.task_name}",
        f"Goal: {inp.description}",
        "Scene objects: " + ", ".join(inp.scene_objects),
        "Skills:",
        *(f"  {line}" for line in inp.api_list),
        "Example calls:",
        *(f"  {line}" for line in inp.example_calls),
        "Constraints:",
        *(f"  {line}" for line in inp.constraints),
    ]
    if inp.feedback:
        parts += ["Feedback on your previous attempt:", inp.feedback]
    return [("system", system), ("user", "\n".join(parts) + "\n")]


_FENCE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)


def extract_code(text: str) -> str:
    """Body of the last fenced block, or the whole text when there is none."""
    blocks = _FENCE.findall(text)
    return blocks[-1] if blocks else text


class GenerationError(Exception):
    def __init__(self, stage: str, raw_text: str, issues: list[str]):
        self.stage = stage  # backend | parse | validate
        self.raw_text = raw_text
        self.issues = list(issues)
        super().__init__(f"{stage}: " + "; ".join(self.issues))


def generate_program(backend: GenerationBackend, inp: CodeAgentInput,
                     embodiment: EmbodimentProfile | None = None) -> Program:
    try:
        raw = backend.complete(render_prompt(inp))
    except BackendError as exc:
        raise GenerationError("backend", "", [str(exc)]) from None
    code = extract_code(raw)
    try:
        program = parse_program(code)
    except ParseError as exc:
        raise GenerationError("parse", raw, [str(exc)]) from None
    issues = validate_program(program, set(inp.scene_objects), embodiment)
    if issues:
        raise GenerationError("validate", raw, [str(i) for i in issues])
    return program


# --- observation ------------------------------------------------------------------

class FailureCategory(str, enum.Enum):
    FLAWED_LOGIC = "FLAWED_LOGIC"
    INCORRECT_API_USAGE = "INCORRECT_API_USAGE"
    OTHER_SYSTEMIC = "OTHER_SYSTEMIC"


_CATEGORY = {
    FailureCause.UNEXECUTABLE: FailureCategory.INCORRECT_API_USAGE,
    FailureCause.INCORRECT_PLACEMENT: FailureCategory.FLAWED_LOGIC,
    FailureCause.LEFT_GRASP_FAILURE: FailureCategory.FLAWED_LOGIC,
    FailureCause.RIGHT_GRASP_FAILURE: FailureCategory.FLAWED_LOGIC,
}

_FIXES = {
    FailureCause.UNEXECUTABLE: "Fix the reported syntax or schema problems; use only listed objects and skills.",
    FailureCause.INCORRECT_PLACEMENT: "Check the target functional point, the held object and the release height.",
    FailureCause.LEFT_GRASP_FAILURE: "Grasp with the arm on the object's side, and free the gripper first.",
    FailureCause.RIGHT_GRASP_FAILURE: "Grasp with the arm on the object's side, and free the gripper first.",
    FailureCause.COLLISION: "Lift the held object higher before moving and keep branch arms distinct.",
    FailureCause.UNREACHABLE: "Keep end-effector moves short and toward the robot base.",
    FailureCause.STEP_BUDGET_EXCEEDED: "Remove redundant steps.",
}


class ObserverError(Exception):
    pass


@dataclass(frozen=True)
class ObserverReport:
    verdicts: tuple[str, ...]
    failing_step: int | None
    category: FailureCategory | None
    rationale: str
    suggested_fixes: str = ""

    def __post_init__(self):
        if any(v not in ("OK", "FAIL") for v in self.verdicts):
            raise ValueError("verdicts must be OK or FAIL")
        if ("FAIL" in self.verdicts) != (self.failing_step is not None):
            raise ValueError("failing_step must be set exactly when some verdict is FAIL")

    def to_json(self) -> dict:
        return {"verdicts": list(self.verdicts), "failing_step": self.failing_step,
                "category": self.category.value if self.category else None,
                "rationale": self.rationale, "suggested_fixes": self.suggested_fixes}

    @classmethod
    def from_json(cls, d: dict) -> "ObserverReport":
        cat = d.get("category")
        step = d.get("failing_step")
        return cls(tuple(d["verdicts"]), int(step) if step is not None else None,
                   FailureCategory(cat) if cat else None, str(d.get("rationale", "")),
                   str(d.get("suggested_fixes", "")))


class RuleBasedObserver:
    """Reads the verdicts straight off the first failing trial log."""

    def observe(self, logs: list[TrialLog], snapshots=None, program: Program | None = None) -> ObserverReport:
        if not logs:
            raise ValueError("observe needs at least one trial log")
        failing = [lg for lg in logs if not lg.success]
        lg = min(failing, key=lambda x: x.trial_index) if failing else logs[0]
        verdicts = tuple(s.outcome for s in lg.steps)
        if lg.success:
            return ObserverReport(verdicts, None, None, f"all {len(logs)} trials succeeded")
        cause = lg.failure_cause
        step = lg.failing_step if lg.failing_step is not None else 0
        if "FAIL" not in verdicts:
            # the checker rejected the end state after every step ran
            verdicts = verdicts[:-1] + ("FAIL",) if verdicts else ("FAIL",)
            step = len(verdicts) - 1
        rec = lg.steps[step] if step < len(lg.steps) else None
        if rec is None:
            reason = "no steps"
        else:
            reason = (rec.resolved_args.get("reason") or "; ".join(rec.resolved_args.get("issues", ()))
                      or "final state fails the success check")
        skill = rec.skill if rec else "-"
        rationale = (f"trial {lg.trial_index}: step {step} ({skill}) ended with {cause.value}: {reason}; "
                     f"{len(failing)} of {len(logs)} trials failed")
        return ObserverReport(verdicts, step, _CATEGORY.get(cause, FailureCategory.OTHER_SYSTEMIC),
                              rationale, _FIXES.get(cause, ""))


def _observer_prompt(logs, snapshots, program) -> list[Turn]:
    text = render_program(program) if isinstance(program, Program) else str(program or "")
    body = [
        "Judge each step of this robot program run. Reply with one JSON object with keys "
        "verdicts (list of OK/FAIL), failing_step (0-based integer or null), category "
        "(FLAWED_LOGIC, INCORRECT_API_USAGE or OTHER_SYSTEMIC), rationale, suggested_fixes.",
        "Program:", text,
        "Snapshots:", *(snapshots or []),
        "Trial logs:", *(canon.dumps(lg.to_json()) for lg in logs),
    ]
    return [("system", f"You inspect robot executions. Prompt format {PROMPT_VERSION}."),
            ("user", "\n".join(body) + "\n")]


def observe(backend, logs: list[TrialLog], snapshots: list[str] | None = None,
            program: Program | None = None) -> ObserverReport:
    """Diagnose a batch of trials with ``backend`` (None means rule-based)."""
    if not logs:
        raise ValueError("observe needs at least one trial log")
    if backend is None or isinstance(backend, RuleBasedObserver):
        return RuleBasedObserver().observe(logs, snapshots, program)
    try:
        raw = backend.complete(_observer_prompt(logs, snapshots, program))
    except BackendError as exc:
        raise ObserverError(str(exc)) from None
    try:
        return ObserverReport.from_json(json.loads(extract_code(raw)))
    except (ValueError, KeyError, TypeError) as exc:
        raise ObserverError(f"unparsable observer reply: {exc}") from None


@dataclass(frozen=True)
class Diagnosis:
    counts: dict[str, int]  # FailureCause values plus SUCCESS
    report: ObserverReport
    issues: tuple[str, ...] = ()

    @property
    def M(self) -> int:
        return sum(self.counts.values())

    def to_json(self) -> dict:
        return {"counts": dict(sorted(self.counts.items())), "report": self.report.to_json(),
                "issues": list(self.issues)}

    @classmethod
    def from_json(cls, d: dict) -> "Diagnosis":
        return cls({k: int(v) for k, v in d["counts"].items()}, ObserverReport.from_json(d["report"]),
                   tuple(d.get("issues", ())))


def cause_counts(logs: list[TrialLog]) -> dict[str, int]:
    out: dict[str, int] = {}
    for lg in logs:
        key = "SUCCESS" if lg.success else lg.failure_cause.value
        out[key] = out.get(key, 0) + 1
    return out


def diagnose(logs: list[TrialLog], report: ObserverReport, issues=()) -> Diagnosis:
    return Diagnosis(cause_counts(logs), report, tuple(issues))


COUNT_ORDER = ("SUCCESS",) + tuple(c.value for c in FailureCause)


def repair_feedback(previous: Program | str | None, diag: Diagnosis) -> str:
    prev = render_program(previous) if isinstance(previous, Program) else (previous or "")
    width = max(len(k) for k in COUNT_ORDER)
    lines = ["Previous program:", "```", prev.rstrip("\n"), "```",
             f"Execution summary over {diag.M} trials:"]
    lines += [f"  {k.ljust(width)}  {diag.counts[k]}" for k in COUNT_ORDER if diag.counts.get(k)]
    if diag.issues:
        lines.append("Validator issues:")
        lines += [f"  - {i}" for i in diag.issues]
    r = diag.report
    cat = r.category.value if r.category else "NONE"
    lines.append(f"Observer ({cat}, failing step {r.failing_step if r.failing_step is not None else '-'}):")
    lines.append(f"  {r.rationale}")
    if r.suggested_fixes:
        lines.append(f"Suggested fixes: {r.suggested_fixes}")
    lines.append("Revise the program: change or replace the failure-prone statements.")
    return "\n".join(lines)


def build_repair_prompt(inp: CodeAgentInput, previous: Program | str | None, diag: Diagnosis) -> CodeAgentInput:
    return CodeAgentInput(inp.task_name, inp.description, inp.api_list, inp.example_calls, inp.constraints,
                          inp.scene_objects, repair_feedback(previous, diag))
