"""Uniform interface for timed solving runs.

Two adapters share one contract: an external Clingo-compatible executable
(program on stdin, killed at the wall-clock limit) and the in-process
ground_eval backend. The internal backend can run on a *deterministic*
clock that derives elapsed seconds from the amount of enumeration work
performed, which makes training runs byte-reproducible in test profiles.
"""

from __future__ import annotations

import logging
import os
import signal
import subprocess
import threading
import time
from dataclasses import dataclass, field

from . import ground_eval
from .aspkit.parser import parse_program

logger = logging.getLogger(__name__)

SOLVER_ENV_VAR = "STREAMFORGE_SOLVER"
DEFAULT_EXTERNAL_ARGS = ("--models=1", "--quiet=2")
KILL_GRACE_SECONDS = 0.1

SAT = "SAT"
UNSAT = "UNSAT"
TIMEOUT = "TIMEOUT"
ERROR = "ERROR"


@dataclass(frozen=True)
class SolveOutcome:
    status: str
    wall_seconds: float
    stderr_excerpt: str = ""

    @property
    def solved(self) -> bool:
        return self.status in (SAT, UNSAT)

    def runtime(self, timeout_seconds: float) -> float:
        """Measured runtime, with TIMEOUT pinned to the limit (no penalty)."""
        return float(timeout_seconds) if self.status == TIMEOUT else self.wall_seconds


@dataclass(frozen=True)
class RunRecord:
    variant_id: str
    instance_id: str
    outcome: SolveOutcome
    timeout_seconds: float
    timestamp: float = 0.0


def parse_external_output(stdout: str, exit_code: int) -> str:
    """Classify a finished external solver run.

    SAT on a literal ``SATISFIABLE`` line or when the 10-bit pattern is set
    in the exit code; UNSAT on ``UNSATISFIABLE`` or exit code 20; ERROR
    otherwise.
    """
    lines = {line.strip() for line in stdout.splitlines()}
    if "SATISFIABLE" in lines:
        return SAT
    if "UNSATISFIABLE" in lines:
        return UNSAT
    if exit_code & 10 == 10:
        return SAT
    if exit_code == 20:
        return UNSAT
    return ERROR


class _DeadlineBudget(ground_eval.OpBudget):
    """Wall-clock deadline checked from within the enumerator."""

    def __init__(self, deadline: float):
        self.deadline = deadline

    def check(self) -> None:
        if time.monotonic() > self.deadline:
            raise ground_eval.Interrupted()


class _OpsBudget(ground_eval.OpBudget):
    """Deterministic budget: ops are the clock."""

    def __init__(self, max_ops: float):
        self.max_ops = max_ops
        self.total = 0

    def charge(self, ops: int) -> None:
        self.total += ops

    def check(self) -> None:
        if self.total > self.max_ops:
            raise ground_eval.Interrupted()


class InternalBackend:
    """Solve via ground_eval; only the function-free desk-scale fragment.

    With ``deterministic=True`` the reported wall time is work-derived
    (``ops / ops_per_second``) and identical across reruns.
    """

    name = "internal"

    def __init__(self, deterministic: bool = False, ops_per_second: float = 2_000_000.0):
        self.deterministic = deterministic
        self.ops_per_second = ops_per_second

    def solve(self, program_text: str, timeout_seconds: float) -> SolveOutcome:
        start = time.monotonic()
        statements, errors = parse_program(program_text)
        if errors:
            first = errors[0]
            return SolveOutcome(ERROR, 0.0, f"syntax error at {first}")
        try:
            gp = ground_eval.ground(statements)
        except ground_eval.GroundingError as exc:
            wall = 0.0 if self.deterministic else time.monotonic() - start
            return SolveOutcome(ERROR, wall, f"grounding failed: {exc}")

        if self.deterministic:
            budget = _OpsBudget(timeout_seconds * self.ops_per_second - gp.ground_ops)
        else:
            budget = _DeadlineBudget(start + timeout_seconds)
        try:
            models = ground_eval.stable_models(gp, model_cap=1, budget=budget)
        except ground_eval.Interrupted:
            return SolveOutcome(TIMEOUT, float(timeout_seconds))
        except ground_eval.UniverseTooLarge as exc:
            wall = 0.0 if self.deterministic else time.monotonic() - start
            return SolveOutcome(ERROR, wall, str(exc))
        if self.deterministic:
            wall = (gp.ground_ops + budget.total) / self.ops_per_second
            if wall >= timeout_seconds:
                return SolveOutcome(TIMEOUT, float(timeout_seconds))
        else:
            wall = time.monotonic() - start
            if wall >= timeout_seconds:
                return SolveOutcome(TIMEOUT, float(timeout_seconds))
        return SolveOutcome(SAT if models else UNSAT, wall)


class ExternalBackend:
    """Adapter for a Clingo-compatible executable.

    The program is delivered on stdin; the whole process group is killed at
    the wall-clock limit, escalating to SIGKILL after a short grace period.
    """

    name = "external"

    def __init__(self, path: str, args: tuple[str, ...] = DEFAULT_EXTERNAL_ARGS):
        self.path = path
        self.args = tuple(args)

    @property
    def command(self) -> list[str]:
        return [self.path, *self.args]

    def solve(self, program_text: str, timeout_seconds: float) -> SolveOutcome:
        start = time.monotonic()
        try:
            proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                start_new_session=True,
            )
        except OSError as exc:
            return SolveOutcome(ERROR, 0.0, f"cannot start solver '{self.path}': {exc}")
        try:
            stdout, stderr = proc.communicate(program_text, timeout=timeout_seconds)
        except subprocess.TimeoutExpired:
            self._kill_tree(proc)
            try:
                proc.communicate(timeout=5)
            except (subprocess.TimeoutExpired, ValueError):  # pragma: no cover
                pass
            return SolveOutcome(TIMEOUT, float(timeout_seconds))
        wall = time.monotonic() - start
        status = parse_external_output(stdout, proc.returncode)
        if status == ERROR:
            excerpt = (stderr or stdout or "").strip()[:500] or (
                f"solver exited with code {proc.returncode}"
            )
            return SolveOutcome(ERROR, wall, excerpt)
        return SolveOutcome(status, wall)

    @staticmethod
    def _kill_tree(proc: subprocess.Popen) -> None:
        try:
            os.killpg(proc.pid, signal.SIGTERM)
        except (ProcessLookupError, PermissionError):
            return
        deadline = time.monotonic() + KILL_GRACE_SECONDS
        while time.monotonic() < deadline:
            if proc.poll() is not None:
                return
            time.sleep(0.01)
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError):  # pragma: no cover
            pass


Backend = InternalBackend | ExternalBackend


def solve(program_text: str, timeout_seconds: float, backend: Backend) -> SolveOutcome:
    if timeout_seconds <= 0:
        raise ValueError("timeout_seconds must be positive")
    return backend.solve(program_text, timeout_seconds)


@dataclass
class TimingScheduler:
    """Serializes timed runs up to a worker cap; optional repeated runs.

    With ``repetitions > 1`` the run whose wall time is the (lower) median
    is reported, damping one-off measurement noise.
    """

    backend: Backend
    worker_cap: int = 1
    repetitions: int = 1
    _gate: threading.BoundedSemaphore = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._gate = threading.BoundedSemaphore(max(1, self.worker_cap))

    def run(self, program_text: str, timeout_seconds: float) -> SolveOutcome:
        with self._gate:
            outcomes = [
                solve(program_text, timeout_seconds, self.backend)
                for _ in range(max(1, self.repetitions))
            ]
        outcomes.sort(key=lambda o: o.wall_seconds)
        return outcomes[(len(outcomes) - 1) // 2]


def external_backend_from_env(config: dict | None = None) -> ExternalBackend | None:
    """Build the external adapter from $STREAMFORGE_SOLVER or solver.path."""
    solver_cfg = (config or {}).get("solver", {})
    path = os.environ.get(SOLVER_ENV_VAR) or solver_cfg.get("path")
    if not path:
        return None
    args = tuple(solver_cfg.get("args", DEFAULT_EXTERNAL_ARGS))
    return ExternalBackend(path, args)


def resolve_backend(config: dict | None = None, deterministic: bool = False) -> Backend:
    external = external_backend_from_env(config)
    if external is not None:
        return external
    return InternalBackend(deterministic=deterministic)
