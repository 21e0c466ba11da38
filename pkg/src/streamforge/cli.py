"""Command-line entry point tying the modules into the full pipeline.

Subcommands: ``train`` (baseline, budgeted loop, selection), ``evaluate``
(variant grid or precomputed runtime grid), ``report`` (candidate-outcome
taxonomy), ``validate`` (one-shot candidate check), ``oracle`` (stable
models via the internal backend).

Exit codes: 0 success, 2 configuration error, 3 baseline violation,
4 provider failure after retries.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from . import aspkit, evalkit, ground_eval, pipeline
from .llm_gateway import (
    ModelRoster,
    OpenAIChatProvider,
    ProviderError,
    ReplayProvider,
)
from .solver_backend import (
    InternalBackend,
    RunRecord,
    SOLVER_ENV_VAR,
    SolveOutcome,
    TimingScheduler,
    external_backend_from_env,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BASELINE = 3
EXIT_PROVIDER = 4

SELECTION_SCHEMA_VERSION = 1
DETERMINISTIC_MODES = ("replay", "test")


class ConfigError(Exception):
    pass


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        config = json.loads(path.read_text("utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    config["_dir"] = str(path.parent)
    return config


def _resolve(config: dict, relpath: str) -> Path:
    p = Path(relpath)
    return p if p.is_absolute() else Path(config["_dir"]) / p


def _profile_mode(config: dict) -> str:
    mode = config.get("profile", {}).get("mode", "test")
    if mode not in ("live", "replay", "test"):
        raise ConfigError(f"unknown profile mode '{mode}'")
    return mode


def _make_provider(config: dict, mode: str):
    llm = config.get("llm", {})
    if mode in DETERMINISTIC_MODES:
        replay_dir = llm.get("replay_dir")
        if not replay_dir:
            raise ConfigError(f"profile mode '{mode}' requires llm.replay_dir")
        directory = _resolve(config, replay_dir)
        if not directory.is_dir():
            raise ConfigError(f"replay directory not found: {directory}")
        return ReplayProvider(directory)
    endpoint = llm.get("endpoint")
    if not endpoint:
        raise ConfigError("live mode requires llm.endpoint")
    api_key = None
    key_env = llm.get("api_key_env")
    if key_env:
        api_key = os.environ.get(key_env)
        if not api_key:
            raise ConfigError(f"credential env var '{key_env}' is not set")
    return OpenAIChatProvider(
        endpoint=endpoint,
        api_key=api_key,
        temperature=llm.get("temperature", 1.0),
        max_retries=llm.get("max_retries", 3),
    )


def _make_backend(config: dict, deterministic: bool):
    if deterministic:
        # External solvers cannot give reproducible timings; test and
        # replay profiles always use the deterministic internal backend.
        return InternalBackend(deterministic=True)
    external = external_backend_from_env(config)
    return external if external is not None else InternalBackend()


def _roster(config: dict, seed: int) -> ModelRoster:
    models = config.get("llm", {}).get("models")
    if not models:
        raise ConfigError("config key llm.models must be a nonempty list")
    return ModelRoster(tuple(models), rng_seed=seed)


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    try:
        config = load_config(args.config)
        mode = _profile_mode(config)
        training = config.get("training", {})
        benchmark = config.get("benchmark", {})
        if "encoding" not in benchmark or not benchmark.get("train"):
            raise ConfigError("config needs benchmark.encoding and benchmark.train")
        seed = args.seed if args.seed is not None else training.get("rng_seed", 0)
        encoding_path = _resolve(config, benchmark["encoding"]).resolve()
        train_paths = [_resolve(config, p) for p in benchmark["train"]]
        for p in [encoding_path, *train_paths]:
            if not p.exists():
                raise ConfigError(f"missing input file: {p}")
        tc = pipeline.TrainingConfig(
            encoding_path=str(encoding_path),
            training_instance_paths=[str(p) for p in train_paths],
            budget_seconds=(
                args.budget_seconds
                if args.budget_seconds is not None
                else training.get("budget_seconds", 1800.0)
            ),
            training_timeout_seconds=(
                args.timeout_seconds
                if args.timeout_seconds is not None
                else training.get("timeout_seconds")
            ),
            improvement_epsilon_seconds=training.get("improvement_epsilon_seconds", 0.0),
            max_selected=training.get("max_selected", 3),
            rng_seed=seed,
        )
        roster = _roster(config, seed)
        deterministic = mode in DETERMINISTIC_MODES
        provider = _make_provider(config, mode)
        backend = _make_backend(config, deterministic)
    except (ConfigError, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ledger_path = out_dir / "ledger.jsonl"
    if not args.resume and ledger_path.exists():
        ledger_path.unlink()

    try:
        with pipeline.Ledger(ledger_path, normalize_time=deterministic) as ledger:
            result = pipeline.run_training(
                tc, roster, provider, backend, ledger, deterministic=deterministic
            )
    except pipeline.BaselineError as exc:
        return _fail(EXIT_BASELINE, str(exc))
    except ProviderError as exc:
        return _fail(EXIT_PROVIDER, f"provider failed after retries: {exc}")

    selection_path = out_dir / "selection.json"
    selected = [
        {"id": cid, "text": result.candidates[cid].snippet.raw_text}
        for cid in result.selection.selected_ids
    ]
    payload = {
        "schema_version": SELECTION_SCHEMA_VERSION,
        "encoding_path": str(encoding_path),
        "seed": seed,
        "baseline_runtimes": {
            i: o.wall_seconds for i, o in sorted(result.baselines.items())
        },
        "selected": selected,
        "training_vbe_sum": result.selection.training_vbe_sum,
        "considered_combinations": result.selection.considered_combinations,
    }
    selection_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")
    print(f"kept {len(result.kept)} candidate(s); selected {len(selected)}")
    print(f"ledger: {ledger_path}")
    print(f"selection: {selection_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def _read_grid_csv(path) -> tuple[list[RunRecord], float]:
    records = []
    max_seconds = 0.0
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            outcome = SolveOutcome(row["status"], float(row["seconds"]))
            max_seconds = max(max_seconds, outcome.wall_seconds)
            records.append(
                RunRecord(row["variant"], row["instance"], outcome, timeout_seconds=0.0)
            )
    return records, max_seconds


def cmd_evaluate(args) -> int:
    config: dict = {"_dir": "."}
    deterministic = False
    try:
        if args.config:
            config = load_config(args.config)
            deterministic = _profile_mode(config) in DETERMINISTIC_MODES
        out_dir = Path(args.out)

        if args.grid:
            records, max_seconds = _read_grid_csv(args.grid)
            timeout = args.timeout_seconds or max(max_seconds, 1.0)
            report = evalkit.aggregate(records, timeout)
        else:
            if not args.selection or not args.test:
                raise ConfigError("evaluate needs --selection and --test (or --grid)")
            selection = json.loads(Path(args.selection).read_text("utf-8"))
            encoding_path = Path(selection["encoding_path"])
            if not encoding_path.is_absolute():
                encoding_path = Path(args.selection).parent / encoding_path
            encoding_text = encoding_path.read_text("utf-8")
            singles = [
                (entry["id"], aspkit.classify_snippet(entry["text"]))
                for entry in selection.get("selected", [])
            ]
            variant_set = evalkit.VariantSet(encoding_text, singles)
            test_dir = Path(args.test)
            instance_paths = sorted(test_dir.glob("*.lp"))
            if not instance_paths:
                raise ConfigError(f"no .lp instances in {test_dir}")
            timeout = args.timeout_seconds or 60.0
            solver_cfg = config.get("solver", {})
            scheduler = TimingScheduler(
                backend=_make_backend(config, deterministic),
                worker_cap=solver_cfg.get("worker_cap", 1),
                repetitions=solver_cfg.get("repetitions", 1),
            )
            records = []
            for variant_id, program in variant_set.variants():
                for instance_path in instance_paths:
                    instance_text = instance_path.read_text("utf-8")
                    outcome = scheduler.run(
                        pipeline.combine_program(program, instance_text), timeout
                    )
                    records.append(
                        RunRecord(variant_id, instance_path.name, outcome, timeout)
                    )
            report = evalkit.aggregate(records, timeout)
    except (ConfigError, OSError, KeyError, ValueError, evalkit.GridIncomplete) as exc:
        return _fail(EXIT_CONFIG, f"{type(exc).__name__}: {exc}")

    files = evalkit.emit_outputs(report, out_dir)
    print(f"VBE reduction: {report.reduction_percent}%")
    for f in files:
        print(f"wrote {f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    path = Path(args.ledger)
    if not path.exists():
        return _fail(EXIT_CONFIG, f"ledger not found: {path}")
    stats = pipeline.stats_report(pipeline.Ledger.read(path))
    for reason in pipeline.ALL_REASONS:
        print(f"{reason:15s} {stats.counts[reason]:4d}  {stats.percentages[reason]:3d}%")
    print(f"{'total':15s} {stats.total:4d}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate


def cmd_validate(args) -> int:
    try:
        config: dict = {"_dir": "."}
        deterministic = False
        if args.config:
            config = load_config(args.config)
            deterministic = _profile_mode(config) in DETERMINISTIC_MODES
        encoding = Path(args.encoding).read_text("utf-8")
        snippet_text = Path(args.snippet).read_text("utf-8")
        instance_paths = sorted(Path(args.instances).glob("*.lp"))
        if not instance_paths:
            raise ConfigError(f"no .lp instances in {args.instances}")
        backend = _make_backend(config, deterministic)
        timeout = args.timeout_seconds or 60.0
    except (ConfigError, OSError) as exc:
        return _fail(EXIT_CONFIG, str(exc))

    import tempfile

    tc = pipeline.TrainingConfig(
        encoding_path=args.encoding,
        training_instance_paths=[str(p) for p in instance_paths],
        training_timeout_seconds=timeout,
    )
    with tempfile.TemporaryDirectory() as tmp:
        ledger = pipeline.Ledger(Path(tmp) / "ledger.jsonl", normalize_time=True)
        session = pipeline.TrainingSession(
            config=tc,
            roster=ModelRoster(("adhoc",)),
            provider=None,
            backend=backend,
            ledger=ledger,
            deterministic=deterministic,
        )
        try:
            baselines = pipeline.run_baseline(session)
        except pipeline.BaselineError as exc:
            return _fail(EXIT_BASELINE, str(exc))
        candidate = pipeline.Candidate(
            id="adhoc",
            snippet=aspkit.classify_snippet(snippet_text),
            source_model="adhoc",
            iteration=0,
        )
        pipeline.validate_candidate(session, candidate, baselines)
        ledger.close()

    print(
        json.dumps(
            {
                "status": candidate.status,
                "reason": candidate.reason,
                "kind": candidate.snippet.kind,
                "per_instance": {
                    i: {"status": o.status, "seconds": o.wall_seconds}
                    for i, o in sorted(candidate.per_instance_seconds.items())
                },
                "baseline": {
                    i: o.wall_seconds for i, o in sorted(baselines.items())
                },
            },
            indent=2,
            sort_keys=True,
        )
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle


def cmd_oracle(args) -> int:
    try:
        text = Path(args.program).read_text("utf-8")
    except OSError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    statements, errors = aspkit.parse_program(text)
    if errors:
        for err in errors:
            print(f"parse error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        gp = ground_eval.ground(statements)
        cap = args.max_models if args.max_models > 0 else None
        models = ground_eval.stable_models(gp, model_cap=cap)
    except (ground_eval.GroundingError, ground_eval.UniverseTooLarge) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    if not models:
        print("UNSATISFIABLE")
        return EXIT_OK
    order = {atom: i for i, atom in enumerate(gp.universe)}
    for number, model in enumerate(models, start=1):
        atoms = sorted(model, key=lambda a: order[a])
        print(f"model {number}: {{{', '.join(atoms)}}}")
    print(f"{len(models)} stable model(s)")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamforge",
        description="Generate, select, and evaluate streamliner constraints for ASP encodings.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run baseline, candidate loop, and selection")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="streamforge-out")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--budget-seconds", type=float, default=None)
    p.add_argument("--timeout-seconds", type=float, default=None)
    p.add_argument("--resume", action="store_true", help="continue an existing ledger")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run the variant grid or aggregate a grid CSV")
    p.add_argument("--selection")
    p.add_argument("--test")
    p.add_argument("--grid", help="precomputed grid CSV (variant,instance,status,seconds)")
    p.add_argument("--config")
    p.add_argument("--timeout-seconds", type=float, default=None)
    p.add_argument("--out", default="streamforge-eval")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="candidate-outcome taxonomy from a ledger")
    p.add_argument("--ledger", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="one-shot candidate check against instances")
    p.add_argument("--encoding", required=True)
    p.add_argument("--snippet", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--config")
    p.add_argument("--timeout-seconds", type=float, default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="print stable models via the internal backend")
    p.add_argument("--program", required=True)
    p.add_argument("--max-models", type=int, default=0, help="0 = enumerate all")
    p.set_defaults(func=cmd_oracle)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
