"""Command line front end: run scripts, replay audits, canned demos,
and the HTTP control service.

Exit codes: 0 success, 1 expectation or replay failure, 2 parse or
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import EngineError, ScenarioParseError
from .manifold import EngineConfig
from .scenario import replay_check, run_scenario
from .self_injection import SEED_NAMES, render_summary, run_self_injection

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_BAD_INPUT = 2


class _CliError(Exception):
    pass


def _load_config(path: str | None) -> EngineConfig:
    config = EngineConfig()
    if path is None:
        return config
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise _CliError(f"config {path}: {err}") from None
    if not isinstance(raw, dict):
        raise _CliError(f"config {path}: expected a JSON object")
    try:
        return config.updated({k: str(v) for k, v in raw.items()})
    except ValueError as err:
        raise _CliError(f"config {path}: {err}") from None


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_BAD_INPUT


def _read_script(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as err:
        raise _CliError(str(err)) from None


def cmd_run(args: argparse.Namespace) -> int:
    script = _read_script(args.script)
    config = _load_config(args.config)
    try:
        result = run_scenario(script, config)
    except ScenarioParseError as err:
        return _fail(str(err))
    except EngineError as err:
        return _fail(f"{err.code}: {err}")
    except ValueError as err:
        return _fail(str(err))

    if args.audit_out:
        Path(args.audit_out).write_text(result.audit_document)
    if args.metrics_out:
        Path(args.metrics_out).write_text(result.metrics_document)
    if args.hash:
        print(result.final_hash)
    for failure in result.expect_failures:
        print(f"expect failed: {failure}", file=sys.stderr)
    return EXIT_OK if result.ok else EXIT_FAILED


def cmd_replay(args: argparse.Namespace) -> int:
    script = _read_script(args.script)
    audit = _read_script(args.audit)
    config = _load_config(args.config)
    try:
        matched = replay_check(audit, script, config)
    except ScenarioParseError as err:
        return _fail(str(err))
    except EngineError as err:
        return _fail(f"{err.code}: {err}")
    except ValueError as err:
        return _fail(str(err))
    print("replay: match" if matched else "replay: mismatch")
    return EXIT_OK if matched else EXIT_FAILED


def cmd_demo(args: argparse.Namespace) -> int:
    if args.name != "self-injection":
        return _fail(f"unknown demo: {args.name!r}")
    seeds = SEED_NAMES if args.seed == "all" else (args.seed,)
    for seed in seeds:
        result = run_self_injection(seed)
        sys.stdout.write(render_summary(result))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import load_service_config, serve

    try:
        service_config = load_service_config(args.config)
    except (OSError, ValueError) as err:
        return _fail(f"service config: {err}")
    serve(service_config)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epistemic-engine",
        description="belief-state engine: scenario runner, replay checker, "
        "demos, and HTTP control service",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario script")
    run_p.add_argument("script")
    run_p.add_argument("--config", help="JSON file of engine config overrides")
    run_p.add_argument("--audit-out", help="write the audit document here")
    run_p.add_argument("--metrics-out", help="write the metrics trace here")
    run_p.add_argument("--hash", action="store_true", help="print the final state hash")
    run_p.set_defaults(func=cmd_run)

    replay_p = sub.add_parser("replay", help="re-run a script against a saved audit")
    replay_p.add_argument("script")
    replay_p.add_argument("audit")
    replay_p.add_argument("--config", help="JSON file of engine config overrides")
    replay_p.set_defaults(func=cmd_replay)

    demo_p = sub.add_parser("demo", help="run a canned demonstration")
    demo_p.add_argument("name", choices=["self-injection"])
    demo_p.add_argument("--seed", choices=list(SEED_NAMES) + ["all"], default="all")
    demo_p.set_defaults(func=cmd_demo)

    serve_p = sub.add_parser("serve", help="start the HTTP control service")
    serve_p.add_argument("--config", required=True, help="service config JSON file")
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as err:
        return _fail(str(err))


if __name__ == "__main__":
    raise SystemExit(main())
