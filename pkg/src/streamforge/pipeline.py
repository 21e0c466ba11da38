"""The training procedure: baseline timing, the budgeted candidate loop,
the discard/keep filter, and selection of the best streamliner set.

Every step is appended to a JSONL ledger. A run can be resumed from any
ledger prefix: recorded baseline runs, LLM responses, and validation runs
are reused rather than repeated, so in a deterministic profile the resumed
ledger is byte-identical to an uninterrupted one.
"""

from __future__ import annotations

import itertools
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .aspkit.snippets import (
    KIND_UNPARSEABLE,
    Snippet,
    classify_snippet,
    compose,
)
from .llm_gateway import (
    Candidate,
    ExtractionError,
    ModelRoster,
    ProviderError,
    REASON_IMPROVED,
    REASON_NO_IMPROVEMENT,
    REASON_SYNTAX_ERROR,
    REASON_UNSAT_ALL,
    REASON_UNSAT_SOME,
    ReplayExhausted,
    STATUS_DISCARDED,
    STATUS_KEPT,
    build_prompt,
    extract_snippets,
    pick_model,
)
from .solver_backend import ERROR, SAT, SolveOutcome, TIMEOUT, UNSAT, solve

logger = logging.getLogger(__name__)

LEDGER_SCHEMA_VERSION = 1
BASELINE_RUN_ID = "baseline"
DEFAULT_BASELINE_PROBE_TIMEOUT = 60.0
MAX_CONSECUTIVE_PROVIDER_FAILURES = 3

ALL_REASONS = (
    REASON_IMPROVED,
    REASON_SYNTAX_ERROR,
    REASON_UNSAT_ALL,
    REASON_UNSAT_SOME,
    REASON_NO_IMPROVEMENT,
)


class BaselineError(Exception):
    """A training instance violates the pipeline's premise (must be SAT)."""


class EmptyPool(Exception):
    """No kept candidates; selection falls back to the baseline only."""


@dataclass
class TrainingConfig:
    encoding_path: str
    training_instance_paths: list[str]
    budget_seconds: float = 1800.0
    training_timeout_seconds: Optional[float] = None  # default: max(10, 5x slowest baseline)
    improvement_epsilon_seconds: float = 0.0
    max_selected: int = 3
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.budget_seconds <= 0:
            raise ValueError("budget_seconds must be positive")
        if self.max_selected < 1:
            raise ValueError("max_selected must be at least 1")
        if not self.training_instance_paths:
            raise ValueError("at least one training instance is required")


@dataclass(frozen=True)
class SelectionResult:
    selected_ids: list[str]
    training_vbe_sum: float
    considered_combinations: int


@dataclass
class TaxonomyStats:
    counts: dict[str, int]
    percentages: dict[str, int]
    total: int


# ---------------------------------------------------------------------------
# Ledger


class Ledger:
    """Append-only JSONL event log, one object per line, schema-versioned.

    With ``normalize_time=True`` (test profiles) wall-clock timestamps are
    written as 0.0 so reruns produce byte-identical files.
    """

    def __init__(self, path, normalize_time: bool = False):
        self.path = Path(path)
        self.normalize_time = normalize_time
        self._fh = None

    def append(self, event: dict) -> dict:
        record = {"v": LEDGER_SCHEMA_VERSION, "ts": 0.0 if self.normalize_time else time.time()}
        record.update(event)
        if self._fh is None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self.path.open("a", encoding="utf-8")
        self._fh.write(json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n")
        self._fh.flush()
        return record

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "Ledger":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    @staticmethod
    def read(path) -> list[dict]:
        path = Path(path)
        if not path.exists():
            return []
        events = []
        with path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(json.loads(line))
        return events


class BudgetClock:
    """Elapsed-time source for the training budget.

    Real mode reads the monotonic clock; deterministic mode accumulates the
    charged durations (solver wall times, LLM latencies), which are
    themselves deterministic in test profiles.
    """

    def __init__(self, deterministic: bool, initial_elapsed: float = 0.0):
        self.deterministic = deterministic
        self._accumulated = initial_elapsed
        self._anchor = time.monotonic() - initial_elapsed

    def charge(self, seconds: float) -> None:
        self._accumulated += seconds

    def elapsed(self) -> float:
        if self.deterministic:
            return self._accumulated
        return time.monotonic() - self._anchor


# ---------------------------------------------------------------------------
# Program assembly


def combine_program(encoding_text: str, instance_text: str) -> str:
    parts = [encoding_text if encoding_text.endswith("\n") else encoding_text + "\n"]
    parts.append(instance_text if instance_text.endswith("\n") else instance_text + "\n")
    return "".join(parts)


def _normalize_snippet_text(text: str) -> str:
    return " ".join(text.split())


# ---------------------------------------------------------------------------
# Training session


@dataclass
class TrainingSession:
    config: TrainingConfig
    roster: ModelRoster
    provider: object
    backend: object
    ledger: Ledger
    deterministic: bool = False
    encoding_text: str = field(init=False)
    instances: dict[str, str] = field(init=False)
    clock: BudgetClock = field(init=False)

    def __post_init__(self) -> None:
        self.encoding_text = Path(self.config.encoding_path).read_text("utf-8")
        self.instances = {}
        for path in self.config.training_instance_paths:
            name = Path(path).name
            if name in self.instances:
                raise ValueError(f"duplicate training instance name: {name}")
            self.instances[name] = Path(path).read_text("utf-8")
        self.clock = BudgetClock(self.deterministic)

    @property
    def instance_ids(self) -> list[str]:
        return list(self.instances)


def _baseline_timeout(config: TrainingConfig) -> float:
    return config.training_timeout_seconds or DEFAULT_BASELINE_PROBE_TIMEOUT


def effective_training_timeout(
    config: TrainingConfig, baselines: dict[str, SolveOutcome]
) -> float:
    if config.training_timeout_seconds is not None:
        return config.training_timeout_seconds
    slowest = max(o.wall_seconds for o in baselines.values())
    return max(10.0, 5.0 * slowest)


def run_baseline(
    session: TrainingSession, prior: Optional[dict[str, SolveOutcome]] = None
) -> dict[str, SolveOutcome]:
    """Time the original encoding on every training instance; all must be SAT."""
    from .aspkit.parser import parse_program

    _, errors = parse_program(session.encoding_text)
    if errors:
        raise BaselineError(f"encoding does not parse: {errors[0]}")
    timeout = _baseline_timeout(session.config)
    baselines: dict[str, SolveOutcome] = {}
    for instance_id, instance_text in session.instances.items():
        if prior is not None and instance_id in prior:
            outcome = prior[instance_id]
        else:
            program = combine_program(session.encoding_text, instance_text)
            outcome = solve(program, timeout, session.backend)
            session.clock.charge(outcome.wall_seconds)
            session.ledger.append(
                {
                    "event": "validation_run",
                    "id": BASELINE_RUN_ID,
                    "instance": instance_id,
                    "status": outcome.status,
                    "seconds": outcome.wall_seconds,
                }
            )
        if outcome.status != SAT:
            detail = f" ({outcome.stderr_excerpt})" if outcome.stderr_excerpt else ""
            raise BaselineError(
                f"training instance '{instance_id}' is {outcome.status}{detail}; "
                "the pipeline requires satisfiable training instances"
            )
        baselines[instance_id] = outcome
    return baselines


def validate_candidate(
    session: TrainingSession,
    candidate: Candidate,
    baselines: dict[str, SolveOutcome],
    prior_runs: Optional[dict[str, SolveOutcome]] = None,
) -> Candidate:
    """Classify a candidate: syntax, satisfiability, then performance."""
    config = session.config
    if candidate.snippet.kind == KIND_UNPARSEABLE:
        candidate.status = STATUS_DISCARDED
        candidate.reason = REASON_SYNTAX_ERROR
        _emit_verdict(session, candidate)
        return candidate

    composed = compose(session.encoding_text, [candidate.snippet], ids=[candidate.id])
    timeout = effective_training_timeout(config, baselines)
    outcomes: dict[str, SolveOutcome] = {}
    for instance_id, instance_text in session.instances.items():
        if prior_runs is not None and instance_id in prior_runs:
            outcomes[instance_id] = prior_runs[instance_id]
            continue
        program = combine_program(composed, instance_text)
        outcome = solve(program, timeout, session.backend)
        session.clock.charge(outcome.wall_seconds)
        outcomes[instance_id] = outcome
        session.ledger.append(
            {
                "event": "validation_run",
                "id": candidate.id,
                "instance": instance_id,
                "status": outcome.status,
                "seconds": outcome.wall_seconds,
            }
        )
    candidate.per_instance_seconds = outcomes

    statuses = [o.status for o in outcomes.values()]
    if any(s == ERROR for s in statuses):
        candidate.status = STATUS_DISCARDED
        candidate.reason = REASON_SYNTAX_ERROR
    elif any(s == UNSAT for s in statuses):
        candidate.status = STATUS_DISCARDED
        candidate.reason = (
            REASON_UNSAT_ALL if all(s == UNSAT for s in statuses) else REASON_UNSAT_SOME
        )
    else:
        epsilon = config.improvement_epsilon_seconds
        improved = any(
            outcomes[i].runtime(timeout) < baselines[i].wall_seconds - epsilon
            for i in outcomes
        )
        if improved:
            candidate.status = STATUS_KEPT
            candidate.reason = REASON_IMPROVED
        else:
            candidate.status = STATUS_DISCARDED
            candidate.reason = REASON_NO_IMPROVEMENT
    _emit_verdict(session, candidate)
    return candidate


def _emit_verdict(session: TrainingSession, candidate: Candidate) -> None:
    session.ledger.append(
        {
            "event": "candidate_verdict",
            "id": candidate.id,
            "status": candidate.status,
            "reason": candidate.reason,
            "duplicate_of": candidate.duplicate_of,
            "per_instance": {
                instance: [o.status, o.wall_seconds]
                for instance, o in sorted(candidate.per_instance_seconds.items())
            },
        }
    )


# ---------------------------------------------------------------------------
# Resume-state reconstruction


@dataclass
class _ResumeState:
    iteration: int = 0
    elapsed: float = 0.0
    baseline_runs: dict[str, SolveOutcome] = field(default_factory=dict)
    candidates: dict[str, Candidate] = field(default_factory=dict)
    verdicts: set[str] = field(default_factory=set)
    validation_runs: dict[str, dict[str, SolveOutcome]] = field(default_factory=dict)
    dedup: dict[str, str] = field(default_factory=dict)
    last_response: Optional[dict] = None
    selection_done: bool = False


def _scan_ledger(events: list[dict]) -> _ResumeState:
    state = _ResumeState()
    for event in events:
        kind = event.get("event")
        if kind == "llm_call":
            state.iteration = event["iteration"] + 1
            state.elapsed += event.get("latency_seconds", 0.0)
            state.last_response = event
        elif kind == "validation_run":
            outcome = SolveOutcome(event["status"], event["seconds"])
            state.elapsed += event["seconds"]
            if event["id"] == BASELINE_RUN_ID:
                state.baseline_runs[event["instance"]] = outcome
            else:
                state.validation_runs.setdefault(event["id"], {})[event["instance"]] = outcome
        elif kind == "candidate_created":
            snippet = classify_snippet(event["snippet"])
            candidate = Candidate(
                id=event["id"],
                snippet=snippet,
                source_model=event["model"],
                iteration=event["iteration"],
                duplicate_of=event.get("duplicate_of"),
            )
            state.candidates[event["id"]] = candidate
            norm = _normalize_snippet_text(event["snippet"])
            if event.get("duplicate_of") is None and norm not in state.dedup:
                state.dedup[norm] = event["id"]
        elif kind == "candidate_verdict":
            state.verdicts.add(event["id"])
            candidate = state.candidates.get(event["id"])
            if candidate is not None:
                candidate.status = event["status"]
                candidate.reason = event["reason"]
                candidate.per_instance_seconds = {
                    instance: SolveOutcome(status, seconds)
                    for instance, (status, seconds) in event.get("per_instance", {}).items()
                }
        elif kind == "selection":
            state.selection_done = True
    return state


# ---------------------------------------------------------------------------
# The loop


def _process_snippets(
    session: TrainingSession,
    iteration: int,
    model_id: str,
    snippet_texts: list[str],
    baselines: dict[str, SolveOutcome],
    state: _ResumeState,
) -> None:
    for index, text in enumerate(snippet_texts):
        candidate_id = f"it{iteration:03d}s{index}"
        norm = _normalize_snippet_text(text)
        existing = state.candidates.get(candidate_id)
        if existing is not None and candidate_id in state.verdicts:
            continue
        if existing is None:
            original_id = state.dedup.get(norm)
            duplicate_of = original_id if original_id is not None else None
            snippet = classify_snippet(text)
            candidate = Candidate(
                id=candidate_id,
                snippet=snippet,
                source_model=model_id,
                iteration=iteration,
                duplicate_of=duplicate_of,
            )
            session.ledger.append(
                {
                    "event": "candidate_created",
                    "id": candidate_id,
                    "iteration": iteration,
                    "model": model_id,
                    "snippet": text,
                    "kind": snippet.kind,
                    "duplicate_of": duplicate_of,
                }
            )
            state.candidates[candidate_id] = candidate
            if duplicate_of is None:
                state.dedup[norm] = candidate_id
        else:
            candidate = existing
        if candidate.duplicate_of is not None:
            original = state.candidates[candidate.duplicate_of]
            candidate.status = original.status
            candidate.reason = original.reason
            candidate.per_instance_seconds = dict(original.per_instance_seconds)
            _emit_verdict(session, candidate)
        else:
            validate_candidate(
                session,
                candidate,
                baselines,
                prior_runs=state.validation_runs.get(candidate_id),
            )
        state.verdicts.add(candidate_id)


def training_loop(
    session: TrainingSession,
    baselines: dict[str, SolveOutcome],
    state: Optional[_ResumeState] = None,
) -> list[Candidate]:
    """Generate and validate candidates until the budget or replay ends."""
    config = session.config
    state = state or _ResumeState()
    iteration = state.iteration

    # Finish any half-processed iteration from a resumed ledger first.
    if state.last_response is not None:
        try:
            snippet_texts = extract_snippets(state.last_response["response_text"])
        except ExtractionError:
            snippet_texts = []
        _process_snippets(
            session,
            state.last_response["iteration"],
            state.last_response["model"],
            snippet_texts,
            baselines,
            state,
        )

    provider_failures = 0
    while session.clock.elapsed() < config.budget_seconds:
        model_id = pick_model(session.roster, iteration)
        elapsed_at_call = session.clock.elapsed()
        try:
            response = session.provider.complete(
                build_prompt(session.encoding_text), model_id
            )
        except ReplayExhausted:
            logger.info("replay responses exhausted after %d iterations", iteration)
            break
        except ProviderError as exc:
            provider_failures += 1
            logger.warning("iteration %d: provider failed: %s", iteration, exc)
            if provider_failures >= MAX_CONSECUTIVE_PROVIDER_FAILURES:
                raise
            iteration += 1
            continue
        provider_failures = 0
        session.clock.charge(response.latency_seconds)
        session.ledger.append(
            {
                "event": "llm_call",
                "iteration": iteration,
                "model": model_id,
                "response_text": response.raw_text,
                "latency_seconds": response.latency_seconds,
                "elapsed": elapsed_at_call,
            }
        )
        try:
            snippet_texts = extract_snippets(response.raw_text)
        except ExtractionError as exc:
            logger.warning("iteration %d: %s; skipping", iteration, exc)
            iteration += 1
            continue
        _process_snippets(session, iteration, model_id, snippet_texts, baselines, state)
        iteration += 1

    return [
        c
        for c in state.candidates.values()
        if c.status == STATUS_KEPT and c.duplicate_of is None
    ]


# ---------------------------------------------------------------------------
# Selection


def select_best(
    kept: Sequence[Candidate],
    baselines: dict[str, float],
    max_selected: int = 3,
) -> SelectionResult:
    """Exhaustively pick the size-k candidate set minimizing the VBE sum.

    The score of a set is the sum over instances of the minimum runtime
    among the original encoding and the set's members. Ties break toward
    the lexicographically smallest sorted id tuple.
    """
    if not kept:
        raise EmptyPool("no kept candidates to select from")
    instances = sorted(baselines)
    runtimes: dict[str, dict[str, float]] = {}
    for candidate in kept:
        missing = [i for i in instances if i not in candidate.per_instance_seconds]
        if missing:
            raise ValueError(f"candidate {candidate.id} lacks runtimes for {missing}")
        runtimes[candidate.id] = {
            i: candidate.per_instance_seconds[i].wall_seconds for i in instances
        }

    k = min(max_selected, len(kept))
    ids = sorted(runtimes)
    best_ids: Optional[tuple[str, ...]] = None
    best_score = float("inf")
    considered = 0
    for combo in itertools.combinations(ids, k):
        considered += 1
        score = sum(
            min(baselines[i], min(runtimes[c][i] for c in combo)) for i in instances
        )
        if score < best_score:
            best_score = score
            best_ids = combo
    assert best_ids is not None
    return SelectionResult(
        selected_ids=list(best_ids),
        training_vbe_sum=best_score,
        considered_combinations=considered,
    )


# ---------------------------------------------------------------------------
# Taxonomy statistics


def taxonomy_percentages(counts: dict[str, int]) -> dict[str, int]:
    """Integer percentages via largest remainder; zeros when empty."""
    total = sum(counts.values())
    if total == 0:
        return {reason: 0 for reason in counts}
    raw = {r: 100.0 * c / total for r, c in counts.items()}
    floors = {r: int(raw[r]) for r in counts}
    leftover = 100 - sum(floors.values())
    order = sorted(counts, key=lambda r: (-(raw[r] - floors[r]), r))
    for r in order[:leftover]:
        floors[r] += 1
    return floors


def stats_report(events: list[dict]) -> TaxonomyStats:
    """Per-reason candidate counts and percentages over a ledger."""
    counts = {reason: 0 for reason in ALL_REASONS}
    for event in events:
        if event.get("event") == "candidate_verdict":
            reason = event.get("reason")
            if reason in counts:
                counts[reason] += 1
    return TaxonomyStats(
        counts=counts,
        percentages=taxonomy_percentages(counts),
        total=sum(counts.values()),
    )


# ---------------------------------------------------------------------------
# Full training orchestration


@dataclass
class TrainingResult:
    selection: SelectionResult
    kept: list[Candidate]
    baselines: dict[str, SolveOutcome]
    candidates: dict[str, Candidate]


def run_training(
    config: TrainingConfig,
    roster: ModelRoster,
    provider,
    backend,
    ledger: Ledger,
    deterministic: bool = False,
) -> TrainingResult:
    """Baseline, budgeted loop, then selection; resumes a partial ledger."""
    events = Ledger.read(ledger.path)
    state = _scan_ledger(events)
    if state.selection_done:
        logger.info("ledger already contains a selection; nothing to do")

    session = TrainingSession(
        config=config,
        roster=roster,
        provider=provider,
        backend=backend,
        ledger=ledger,
        deterministic=deterministic,
    )
    session.clock = BudgetClock(deterministic, initial_elapsed=state.elapsed)
    if hasattr(provider, "skip"):
        provider.skip(state.iteration)

    baselines = run_baseline(session, prior=state.baseline_runs or None)
    kept = training_loop(session, baselines, state)

    baseline_runtimes = {i: o.wall_seconds for i, o in baselines.items()}
    try:
        selection = select_best(kept, baseline_runtimes, config.max_selected)
    except EmptyPool:
        selection = SelectionResult(
            selected_ids=[],
            training_vbe_sum=sum(baseline_runtimes.values()),
            considered_combinations=0,
        )
    if not state.selection_done:
        session.ledger.append(
            {
                "event": "selection",
                "selected": selection.selected_ids,
                "training_vbe_sum": selection.training_vbe_sum,
                "considered_combinations": selection.considered_combinations,
            }
        )
    return TrainingResult(
        selection=selection,
        kept=kept,
        baselines=baselines,
        candidates=state.candidates,
    )
