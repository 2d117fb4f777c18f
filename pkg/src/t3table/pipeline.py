"""Stage orchestration: drive a backend through a mode's stage graph.

Stage 2 of the three-stage pipeline runs as native integration (the counting
rules are fully determined, and executing model-emitted code is off by
default); the direct-execution variant keeps stage 2 as a model call. Every
stage's prompt and raw response land in an append-only transcript that can be
replayed through the parsers.
"""

from __future__ import annotations

import json
import random
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import prompts
from .backends import Backend, BackendError, CachingBackend, LlmRequest, LlmResponse
from .model import EVENT_ORDER, EventTuple, MatchInstance, RawEventLabel, SummaryTable, TeamSide, Unknown
from .prompts import Message, ModeKind, PipelineMode, build_instruction, build_prompt
from .tableio import ParsedTableOutcome, parse_model_table
from .tuples import TupleParseReport, integrate, parse_tuples

DEFAULT_MODEL = "t3-offline"


@dataclass(frozen=True)
class StageRecord:
    stage: int
    kind: str  # "llm" or "native"
    prompt: tuple[Message, ...] | None
    response: str
    latency_s: float = 0.0


@dataclass(frozen=True)
class RunTranscript:
    instance_id: str
    mode: str
    stages: tuple[StageRecord, ...]
    tuples: tuple[EventTuple, ...] = ()
    rejected_lines: tuple[tuple[str, str], ...] = ()
    unknown_label_count: int = 0
    final_table_text: str = ""
    outcome: ParsedTableOutcome = field(default_factory=lambda: ParsedTableOutcome.malformed("empty", "no stages ran"))
    total_latency_s: float = 0.0


def render_tuples_table(tuples: Iterable[EventTuple]) -> str:
    """The truncated pipeline's output: extracted tuples themselves as a table."""
    lines = ["Player,Team,Event"]
    for t in tuples:
        label = t.label.text if isinstance(t.label, Unknown) else t.label.value
        lines.append(f"{t.player or ''},{t.team.display},{label}")
    return "\n".join(lines)


Integrator = Callable[[Sequence[EventTuple]], SummaryTable]


def subprocess_integrator(command: Sequence[str], timeout_s: float = 30.0) -> Integrator:
    """Stage-2 extension hook: an external process reads tuple lines on stdin
    and writes (team, event, count) lines on stdout. Off by default."""

    def run(tuples: Sequence[EventTuple]) -> SummaryTable:
        proc = subprocess.run(
            list(command),
            input=prompts.render_tuple_lines(tuples),
            capture_output=True,
            text=True,
            timeout=timeout_s,
        )
        if proc.returncode != 0:
            raise BackendError(f"external integrator failed ({proc.returncode}): {proc.stderr[:200]}")
        table = prompts.parse_count_tuples(proc.stdout)
        if table is None:
            raise BackendError("external integrator output is not a full count-tuple listing")
        return table

    return run


class _Run:
    def __init__(self, backend: Backend, model: str, temperature: float) -> None:
        self.backend = backend
        self.model = model
        self.temperature = temperature
        self.stages: list[StageRecord] = []

    def call(self, stage: int, messages: list[Message]) -> LlmResponse:
        request = LlmRequest(model=self.model, messages=tuple(messages), temperature=self.temperature)
        response = self.backend.complete(request)
        self.stages.append(
            StageRecord(stage=stage, kind="llm", prompt=tuple(messages), response=response.text, latency_s=response.latency_s)
        )
        return response

    def native(self, stage: int, text: str) -> None:
        self.stages.append(StageRecord(stage=stage, kind="native", prompt=None, response=text))


def run_instance(
    instance: MatchInstance,
    mode: PipelineMode,
    backend: Backend,
    *,
    model: str = DEFAULT_MODEL,
    temperature: float = 0.0,
    examples_block: str | None = None,
    integrator: Integrator | None = None,
) -> RunTranscript:
    """Execute one instance through the mode's stage graph; never raises on backend failure."""
    instruction = build_instruction()
    run = _Run(backend, model, temperature)
    report = TupleParseReport(())
    final_text = ""
    try:
        if mode.kind in (ModeKind.ZERO_SHOT, ModeKind.ZERO_SHOT_COT, ModeKind.FEW_SHOT, ModeKind.T3_MERGED):
            response = run.call(1, build_prompt(mode, 1, instruction, instance.commentary, examples_block))
            final_text = response.text
            if mode.kind is ModeKind.T3_MERGED:
                report = parse_tuples(response.text)
            outcome = parse_model_table(final_text)
        elif mode.kind is ModeKind.T2:
            response = run.call(1, build_prompt(mode, 1, instruction, instance.commentary))
            report = parse_tuples(response.text)
            final_text = render_tuples_table(report.tuples)
            run.native(2, final_text)
            outcome = ParsedTableOutcome.ok(integrate(report.tuples))
        elif mode.kind is ModeKind.T3:
            response = run.call(1, build_prompt(mode, 1, instruction, instance.commentary))
            report = parse_tuples(response.text)
            counts = integrator(report.tuples) if integrator else integrate(report.tuples)
            counts_text = prompts.render_count_tuples(counts)
            run.native(2, counts_text)
            response = run.call(3, build_prompt(mode, 3, instruction, counts_text))
            final_text = response.text
            outcome = parse_model_table(final_text)
        elif mode.kind is ModeKind.T3_DIRECT:
            response = run.call(1, build_prompt(mode, 1, instruction, instance.commentary))
            report = parse_tuples(response.text)
            response = run.call(2, build_prompt(mode, 2, instruction, response.text))
            response = run.call(3, build_prompt(mode, 3, instruction, response.text))
            final_text = response.text
            outcome = parse_model_table(final_text)
        else:  # pragma: no cover - exhaustive over ModeKind
            raise ValueError(f"unhandled mode {mode.name}")
    except BackendError as exc:
        outcome = ParsedTableOutcome.malformed("backend_error", str(exc))
    return RunTranscript(
        instance_id=instance.id,
        mode=mode.name,
        stages=tuple(run.stages),
        tuples=report.tuples,
        rejected_lines=report.rejected_lines,
        unknown_label_count=report.unknown_label_count,
        final_table_text=final_text,
        outcome=outcome,
        total_latency_s=sum(s.latency_s for s in run.stages),
    )


def _all_events_occur(instance: MatchInstance) -> bool:
    table = instance.ground_truth
    if table is None:
        return False
    return all(
        table.get(TeamSide.HOME, e) + table.get(TeamSide.AWAY, e) >= 1 for e in EVENT_ORDER
    )


def pick_exemplars(
    dataset: Sequence[MatchInstance], instance: MatchInstance, shots: int, seed: int
) -> list[MatchInstance]:
    """Seeded choice of exemplar instances in which every event type occurs."""
    candidates = [d for d in dataset if d.id != instance.id and _all_events_occur(d)]
    if not candidates:
        raise ValueError("no few-shot exemplar candidates: need instances where all events occur")
    rng = random.Random(f"{seed}:{instance.id}")
    return rng.sample(candidates, k=min(shots, len(candidates)))


def run_batch(
    dataset: Sequence[MatchInstance],
    mode: PipelineMode,
    backend: Backend,
    parallelism: int = 1,
    *,
    model: str = DEFAULT_MODEL,
    temperature: float = 0.0,
    cache_dir: str | Path | None = None,
    seed: int = 0,
    on_progress: Callable[[int, int], None] | None = None,
    integrator: Integrator | None = None,
) -> list[RunTranscript]:
    """Run the whole dataset; transcripts come back in dataset order."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if cache_dir is not None:
        backend = CachingBackend(cache_dir, backend)
    progress_lock = threading.Lock()
    done = 0

    def run_one(index: int) -> RunTranscript:
        nonlocal done
        instance = dataset[index]
        examples_block = None
        if mode.kind is ModeKind.FEW_SHOT:
            exemplars = pick_exemplars(dataset, instance, mode.shots, seed)
            examples_block = prompts.render_examples_block(exemplars, mode.with_cot)
        transcript = run_instance(
            instance,
            mode,
            backend,
            model=model,
            temperature=temperature,
            examples_block=examples_block,
            integrator=integrator,
        )
        if on_progress is not None:
            with progress_lock:
                done += 1
                on_progress(done, len(dataset))
        return transcript

    if parallelism == 1 or len(dataset) <= 1:
        return [run_one(i) for i in range(len(dataset))]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run_one, range(len(dataset))))


def replay_outcome(transcript: RunTranscript) -> ParsedTableOutcome:
    """Recompute the final outcome from the recorded raw responses."""
    llm_stages = [s for s in transcript.stages if s.kind == "llm"]
    if not llm_stages:
        return transcript.outcome
    mode = prompts.parse_mode(transcript.mode)
    if mode.kind is ModeKind.T2:
        return ParsedTableOutcome.ok(integrate(parse_tuples(llm_stages[0].response).tuples))
    return parse_model_table(llm_stages[-1].response)


# --- transcript files -----------------------------------------------------------

def _label_to_json(label: RawEventLabel | Unknown) -> dict:
    if isinstance(label, Unknown):
        return {"event": label.text, "known": False}
    return {"event": label.value, "known": True}


def transcript_to_dict(t: RunTranscript) -> dict:
    outcome: dict
    if t.outcome.is_ok:
        assert t.outcome.table is not None
        outcome = {"table": [list(t.outcome.table.row(side)) for side in TeamSide]}
    else:
        outcome = {"malformed": {"code": t.outcome.reason_code, "detail": t.outcome.detail}}
    return {
        "id": t.instance_id,
        "mode": t.mode,
        "stages": [
            {
                "stage": s.stage,
                "kind": s.kind,
                "prompt": [[role, text] for role, text in s.prompt] if s.prompt is not None else None,
                "response": s.response,
                "latency_s": s.latency_s,
            }
            for s in t.stages
        ],
        "tuples": [
            {"player": tp.player, "team": tp.team.display, **_label_to_json(tp.label)}
            for tp in t.tuples
        ],
        "rejected_lines": [[line, reason] for line, reason in t.rejected_lines],
        "unknown_label_count": t.unknown_label_count,
        "final_table_text": t.final_table_text,
        "outcome": outcome,
        "latency_s": t.total_latency_s,
    }


def _tuple_from_dict(d: dict) -> EventTuple:
    team = TeamSide.HOME if d["team"] == TeamSide.HOME.display else TeamSide.AWAY
    label: RawEventLabel | Unknown
    label = RawEventLabel(d["event"]) if d.get("known", True) else Unknown(d["event"])
    return EventTuple(team=team, label=label, player=d.get("player"))


def transcript_from_dict(d: dict) -> RunTranscript:
    if "table" in d["outcome"]:
        rows = d["outcome"]["table"]
        outcome = ParsedTableOutcome.ok(SummaryTable(tuple(tuple(r) for r in rows)))
    else:
        m = d["outcome"]["malformed"]
        outcome = ParsedTableOutcome.malformed(m["code"], m["detail"])
    return RunTranscript(
        instance_id=d["id"],
        mode=d["mode"],
        stages=tuple(
            StageRecord(
                stage=s["stage"],
                kind=s["kind"],
                prompt=tuple((role, text) for role, text in s["prompt"]) if s["prompt"] is not None else None,
                response=s["response"],
                latency_s=s.get("latency_s", 0.0),
            )
            for s in d["stages"]
        ),
        tuples=tuple(_tuple_from_dict(tp) for tp in d.get("tuples", [])),
        rejected_lines=tuple((line, reason) for line, reason in d.get("rejected_lines", [])),
        unknown_label_count=d.get("unknown_label_count", 0),
        final_table_text=d.get("final_table_text", ""),
        outcome=outcome,
        total_latency_s=d.get("latency_s", 0.0),
    )


def write_transcripts(transcripts: Iterable[RunTranscript], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for t in transcripts:
            f.write(json.dumps(transcript_to_dict(t), ensure_ascii=False) + "\n")


def read_transcripts(path: str | Path) -> list[RunTranscript]:
    out: list[RunTranscript] = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(transcript_from_dict(json.loads(line)))
    return out
