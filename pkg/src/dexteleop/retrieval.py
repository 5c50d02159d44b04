"""Task-to-type retrieval: prompt building, plan parsing, matching backends.

Two backends select manipulation types for a task: an external multimodal
model endpoint (speaking a small HTTP JSON shape, replayable by the local
fixture server for tests) and a deterministic attribute matcher that ranks
library types by weighted token overlap with the command text.  Plans are
exchanged in a structured transcript format that parses back losslessly.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import httpx
import yaml

from .errors import (
    LibraryFormatError,
    PlanFormatError,
    RetrievalError,
    UnknownTypeNameError,
)
from .library import ATTRIBUTE_FIELDS, AttributeQuery, Library, query_by_attributes

DEFAULT_TIMEOUT_S = 30.0

PROMPT_HEADER = """You are a robotic manipulation expert. When given a user goal and an image of tools or ingredients, your job is to:
(1) Decompose the task into clear manipulation steps.
(2) Assign a suitable grasping type for each hand (left/right) in every step based on the provided grasp type library.
(3) Format your response in this structured way:
The task is divided into N steps:
Step 1: [describe the subtask]
Step 2: [describe the subtask]
...
The types in each step are:
Step 1:  Left type: [grasp type name]  Right type: [grasp type name]
Step 2:  Left type: [grasp type name]  Right type: [grasp type name]
...
"""

_ATTR_LABELS = {
    "hand_posture": "hand posture",
    "object_categories": "object categories",
    "contact_parts": "contact parts",
    "part_geometry": "part geometry",
    "grasp_direction": "grasp direction",
    "purpose": "purpose",
}


@dataclass(frozen=True)
class TaskRequest:
    command_text: str
    scene_image_b64: str | None = None
    hands: str = "both"  # left | right | both

    def __post_init__(self):
        if not self.command_text.strip():
            raise ValueError("command_text must be non-empty")
        if self.hands not in ("left", "right", "both"):
            raise ValueError(f"hands must be left/right/both, got {self.hands!r}")


@dataclass(frozen=True)
class PlanStep:
    description: str
    left_type: str | None = None  # type ids, resolved against the library
    right_type: str | None = None

    def __post_init__(self):
        if self.left_type is None and self.right_type is None:
            raise PlanFormatError(f"plan step assigns no hand: {self.description!r}")


@dataclass(frozen=True)
class ManipulationPlan:
    steps: tuple[PlanStep, ...]

    def __post_init__(self):
        if not self.steps:
            raise PlanFormatError("plan has no steps")

    def assignments(self) -> int:
        return sum((s.left_type is not None) + (s.right_type is not None) for s in self.steps)


@dataclass(frozen=True)
class RetrievalBackend:
    kind: str = "deterministic-matcher"  # or "external-model"
    endpoint: str = ""
    api_key: str = ""
    timeout_s: float = DEFAULT_TIMEOUT_S

    def __post_init__(self):
        if self.kind not in ("deterministic-matcher", "external-model"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "external-model" and not self.endpoint:
            raise ValueError("external-model backend requires an endpoint")

    @staticmethod
    def from_env() -> "RetrievalBackend":
        endpoint = os.environ.get("MODEL_ENDPOINT", "")
        if not endpoint:
            return RetrievalBackend()
        return RetrievalBackend(
            kind="external-model", endpoint=endpoint, api_key=os.environ.get("MODEL_API_KEY", "")
        )


# ---------------------------------------------------------------------------
# Prompt construction
# ---------------------------------------------------------------------------


def build_prompt(library: Library, request: TaskRequest) -> str:
    lines = [PROMPT_HEADER, "Grasp type library:"]
    for t in library.types:
        attrs = "; ".join(
            f"{_ATTR_LABELS[name]}: {t.attributes.field_text(name)}" for name in ATTRIBUTE_FIELDS
        )
        lines.append(f"- {t.name}: {attrs}")
    if request.scene_image_b64:
        lines.append("[An image of the scene accompanies this request.]")
    task = request.command_text.strip()
    if task.lower().startswith("i want to"):
        lines.append(f"User Command: {task}")
    else:
        lines.append(f"User Command: I want to {task}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Plan transcript parsing / rendering
# ---------------------------------------------------------------------------

_STEP_COUNT_RE = re.compile(r"the task is divided into\s+(\d+)\s+steps?", re.IGNORECASE)
_STEP_LINE_RE = re.compile(r"^\s*step\s+(\d+)\s*:\s*(.*)$", re.IGNORECASE)
_TYPES_MARKER_RE = re.compile(r"the types in each step are", re.IGNORECASE)
_HAND_TYPE_RE = re.compile(
    r"(left|right)\s+type\s*:\s*([^()\n]*?)(?=\s*(?:left|right)\s+type\s*:|\(|$)", re.IGNORECASE
)


def _clean_type_name(raw: str) -> str:
    return raw.split("(")[0].strip().rstrip(".").strip()


def parse_plan(model_output: str, library: Library) -> ManipulationPlan:
    """Parse the structured transcript into a validated plan.

    Raises PlanFormatError when the step/type markers are missing and
    UnknownTypeNameError listing every type name that is not in the library.
    """
    count_match = _STEP_COUNT_RE.search(model_output)
    if not count_match:
        raise PlanFormatError("missing 'The task is divided into N steps' marker")
    n_steps = int(count_match.group(1))
    if n_steps < 1:
        raise PlanFormatError("plan declares zero steps")

    marker = _TYPES_MARKER_RE.search(model_output)
    if not marker:
        raise PlanFormatError("missing 'The types in each step are' marker")
    head = model_output[: marker.start()]
    tail = model_output[marker.end() :]

    descriptions: dict[int, str] = {}
    for line in head.splitlines():
        m = _STEP_LINE_RE.match(line)
        if m:
            descriptions[int(m.group(1))] = m.group(2).strip()

    assignments: dict[int, dict[str, str]] = {}
    current = None
    for line in tail.splitlines():
        m = _STEP_LINE_RE.match(line)
        if m:
            current = int(m.group(1))
            assignments.setdefault(current, {})
            line = m.group(2)
        for hand_match in _HAND_TYPE_RE.finditer(line):
            if current is None:
                raise PlanFormatError("type assignment found before any 'Step N:' marker")
            name = _clean_type_name(hand_match.group(2))
            if name:
                assignments[current][hand_match.group(1).lower()] = name

    if not assignments:
        raise PlanFormatError("no per-step type assignments found")

    unknown: list[str] = []
    steps: list[PlanStep] = []
    for i in range(1, n_steps + 1):
        hands = assignments.get(i, {})
        resolved: dict[str, str | None] = {"left": None, "right": None}
        for hand, name in hands.items():
            mtype = library.by_name(name)
            if mtype is None:
                unknown.append(name)
            else:
                resolved[hand] = mtype.id
        if not unknown and not hands:
            raise PlanFormatError(f"step {i} has no type assignment")
        if not unknown:
            steps.append(
                PlanStep(
                    description=descriptions.get(i, f"Step {i}"),
                    left_type=resolved["left"],
                    right_type=resolved["right"],
                )
            )
    if unknown:
        raise UnknownTypeNameError(unknown)
    return ManipulationPlan(steps=tuple(steps))


def render_plan(plan: ManipulationPlan, library: Library) -> str:
    """Canonical transcript for a plan; parse_plan(render_plan(p)) == p."""
    lines = [f"The task is divided into {len(plan.steps)} steps:"]
    for i, step in enumerate(plan.steps, start=1):
        lines.append(f"Step {i}: {step.description}")
    lines.append("The types in each step are:")
    for i, step in enumerate(plan.steps, start=1):
        lines.append(f"Step {i}:")
        if step.left_type is not None:
            lines.append(f"Left type: {library.get_type(step.left_type).name}")
        if step.right_type is not None:
            lines.append(f"Right type: {library.get_type(step.right_type).name}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Retrieval
# ---------------------------------------------------------------------------


def match_command(library: Library, command_text: str):
    """Deterministic top-1 attribute match for a free-text command."""
    ranked = query_by_attributes(library, AttributeQuery.from_text(command_text))
    return ranked[0]


def _deterministic_plan(request: TaskRequest, library: Library) -> ManipulationPlan:
    top, _ = match_command(library, request.command_text)
    return ManipulationPlan(
        steps=(
            PlanStep(
                description=request.command_text,
                left_type=top.id if request.hands in ("left", "both") else None,
                right_type=top.id if request.hands in ("right", "both") else None,
            ),
        )
    )


def _call_endpoint(backend: RetrievalBackend, prompt: str, image_b64: str | None) -> str:
    payload = {"prompt": prompt}
    if image_b64:
        payload["image_b64"] = image_b64
    headers = {"content-type": "application/json"}
    if backend.api_key:
        headers["authorization"] = f"Bearer {backend.api_key}"
    try:
        response = httpx.post(backend.endpoint, json=payload, headers=headers, timeout=backend.timeout_s)
        response.raise_for_status()
        return response.json()["text"]
    except httpx.TimeoutException as exc:
        raise RetrievalError(f"model endpoint timed out after {backend.timeout_s} s") from exc
    except (httpx.HTTPError, KeyError, json.JSONDecodeError) as exc:
        raise RetrievalError(f"model endpoint failed: {exc}") from exc


def retrieve(request: TaskRequest, backend: RetrievalBackend, library: Library) -> ManipulationPlan:
    """Select types for a task; external format errors get one retry."""
    if backend.kind == "deterministic-matcher":
        return _deterministic_plan(request, library)
    prompt = build_prompt(library, request)
    text = _call_endpoint(backend, prompt, request.scene_image_b64)
    try:
        return parse_plan(text, library)
    except PlanFormatError:
        text = _call_endpoint(backend, prompt, request.scene_image_b64)
        return parse_plan(text, library)


# ---------------------------------------------------------------------------
# Fixture server: replays canned transcripts over the endpoint wire shape
# ---------------------------------------------------------------------------


class FixtureTranscriptServer:
    """Local HTTP stand-in for the model endpoint.

    Replays the given transcripts in order (cycling); an optional delay
    simulates slow queries for loop-isolation tests.
    """

    def __init__(self, transcripts, delay_s: float = 0.0):
        self.transcripts = list(transcripts)
        self.delay_s = delay_s
        self.requests: list[dict] = []
        self._counter = 0
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):  # noqa: N802 (stdlib naming)
                length = int(self.headers.get("content-length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                with outer._lock:
                    outer.requests.append(body)
                    text = outer.transcripts[outer._counter % len(outer.transcripts)]
                    outer._counter += 1
                if outer.delay_s:
                    time.sleep(outer.delay_s)
                payload = json.dumps({"text": text}).encode()
                self.send_response(200)
                self.send_header("content-type", "application/json")
                self.send_header("content-length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/"

    def __enter__(self) -> "FixtureTranscriptServer":
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def backend(self, timeout_s: float = DEFAULT_TIMEOUT_S) -> RetrievalBackend:
        return RetrievalBackend(kind="external-model", endpoint=self.url, timeout_s=timeout_s)


# ---------------------------------------------------------------------------
# Bundled benchmark
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchCase:
    case_id: str
    kind: str  # single-object | multi-object
    command: str
    hands: str = "right"
    transcript: str = ""
    oracle_single: str = ""  # type id for the commanded hand
    oracle_steps: tuple = ()  # ((left_id|None, right_id|None), ...)


@dataclass(frozen=True)
class BenchResult:
    case_id: str
    kind: str
    passed: bool
    expected: str
    got: str


@dataclass(frozen=True)
class BenchReport:
    results: tuple[BenchResult, ...]
    passed: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", sum(r.passed for r in self.results))

    def __len__(self):
        return len(self.results)


def load_benchmark(path: str | Path) -> list[BenchCase]:
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict) or "cases" not in doc:
        raise LibraryFormatError(f"benchmark file {path} must define 'cases'")
    cases = []
    for cd in doc["cases"]:
        kind = cd["kind"]
        if kind == "single-object":
            hands = cd.get("hands", "right")
            cases.append(
                BenchCase(
                    case_id=cd["id"],
                    kind=kind,
                    command=cd["command"],
                    hands=hands,
                    oracle_single=cd["oracle"][hands],
                )
            )
        else:
            steps = tuple(
                (step.get("left"), step.get("right")) for step in cd["oracle"]["steps"]
            )
            cases.append(
                BenchCase(
                    case_id=cd["id"],
                    kind=kind,
                    command=cd["command"],
                    transcript=cd["transcript"],
                    oracle_steps=steps,
                )
            )
    return cases


def _run_single(case: BenchCase, library: Library) -> BenchResult:
    plan = retrieve(
        TaskRequest(command_text=case.command, hands=case.hands),
        RetrievalBackend(),
        library,
    )
    step = plan.steps[0]
    got = step.right_type if case.hands == "right" else step.left_type
    return BenchResult(
        case_id=case.case_id,
        kind=case.kind,
        passed=got == case.oracle_single,
        expected=case.oracle_single,
        got=got or "",
    )


def _run_multi(case: BenchCase, library: Library) -> BenchResult:
    try:
        plan = parse_plan(case.transcript, library)
        got = tuple((s.left_type, s.right_type) for s in plan.steps)
        passed = got == case.oracle_steps
        got_text = "; ".join(f"{left or '-'}/{right or '-'}" for left, right in got)
    except (PlanFormatError, UnknownTypeNameError) as exc:
        passed = False
        got_text = f"parse error: {exc}"
    expected_text = "; ".join(f"{left or '-'}/{right or '-'}" for left, right in case.oracle_steps)
    return BenchResult(
        case_id=case.case_id, kind=case.kind, passed=passed, expected=expected_text, got=got_text
    )


def run_benchmark(cases, library: Library) -> BenchReport:
    """Score every case: singles through the deterministic matcher,
    multi-object cases through their stubbed transcripts."""
    results = []
    for case in cases:
        if case.kind == "single-object":
            results.append(_run_single(case, library))
        else:
            results.append(_run_multi(case, library))
    return BenchReport(results=tuple(results))
