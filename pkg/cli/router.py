"""Command routers and the dispatcher that maps subcommands to handlers and exit codes."""
import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

from config import config
from database.crud import BenchRecordCRUD, RunCRUD
from database.engine import init_db, session_factory, use_database
from market.errors import (
    BackendError,
    ConvergenceError,
    CupidError,
    EstimationError,
    NumericalError,
)
from market.io import write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NOT_CONVERGED = 2

REPORT_NAME = "report.json"


class CliArgumentParser(argparse.ArgumentParser):
    """Usage errors print the usage on stderr and exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def exit_code_for(error: Exception) -> int:
    if isinstance(error, (ConvergenceError, EstimationError, NumericalError, BackendError)):
        return EXIT_NOT_CONVERGED
    return EXIT_INVALID


def argument(*flags, **kwargs):
    """Attach an argparse argument to a command handler."""

    def decorator(handler):
        handler.__dict__.setdefault("cli_arguments", []).insert(0, (flags, kwargs))
        return handler

    return decorator


@dataclass
class Command:
    name: str
    help: str
    handler: Callable
    arguments: List = field(default_factory=list)


@dataclass
class RunContext:
    """What a handler gets: parsed arguments, the output directory and report flags."""

    args: argparse.Namespace
    out: Optional[Path]
    timings: bool
    jobs: int
    seed: Optional[int]
    bench_rows: List[Dict] = field(default_factory=list)

    def path(self, name: str) -> Path:
        return self.out / name


class Router:
    """Collects subcommands; one router per handler module."""

    def __init__(self, name: str = None):
        self.name = name
        self.commands: List[Command] = []

    def command(self, name: str, help: str = ""):
        def decorator(handler):
            self.commands.append(Command(name, help, handler, handler.__dict__.get("cli_arguments", [])))
            return handler

        return decorator


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=None, help=f"logging level (default {config.LOG_LEVEL})")
    common.add_argument("--no-timings", action="store_true", help="omit timing fields from reports")
    common.add_argument("--ledger", default=None, help="SQLite file recording the run")
    common.add_argument("--jobs", type=int, default=config.JOBS, help="parallel jobs")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--out", default=None, help="output directory")
    return common


class Dispatcher:
    def __init__(self):
        self.routers: List[Router] = []

    def include_router(self, router: Router) -> None:
        self.routers.append(router)

    @property
    def commands(self) -> Dict[str, Command]:
        return {command.name: command for router in self.routers for command in router.commands}

    def build_parser(self) -> CliArgumentParser:
        parser = CliArgumentParser(prog="cupid", description="Transferable-utility matching markets")
        subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CliArgumentParser)
        common = _common_options()
        for command in self.commands.values():
            sub = subparsers.add_parser(command.name, help=command.help, description=command.help, parents=[common])
            for flags, kwargs in command.arguments:
                sub.add_argument(*flags, **kwargs)
        return parser

    def dispatch(self, argv: Optional[List[str]] = None) -> int:
        """Parse argv, run the handler, write report.json; returns the exit code."""
        parser = self.build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return int(e.code or 0)

        level = (args.log_level or config.LOG_LEVEL).upper()
        logging.getLogger().setLevel(getattr(logging, level, logging.INFO))

        out = Path(args.out) if args.out else None
        context = RunContext(args, out, timings=not args.no_timings, jobs=max(1, args.jobs), seed=args.seed)
        ledger = args.ledger or config.LEDGER_FILE
        run_id = self._start_ledger(ledger, args)

        command = self.commands[args.command]
        report = {"schema_version": config.SCHEMA_VERSION, "command": command.name}
        try:
            payload = command.handler(context) or {}
            report.update(payload)
            code = EXIT_OK if payload.get("converged", True) else EXIT_NOT_CONVERGED
            if code != EXIT_OK:
                logger.warning(f"{command.name}: did not converge")
        except CupidError as e:
            code = exit_code_for(e)
            logger.error(f"{command.name} failed: {e}")
            report["error"] = {"type": type(e).__name__, "message": str(e)}
        report["exit_code"] = code
        report["status"] = {EXIT_OK: "ok", EXIT_INVALID: "invalid", EXIT_NOT_CONVERGED: "not_converged"}[code]

        if out is not None:
            write_json(report, context.path(REPORT_NAME))
        else:
            print(json.dumps(report, indent=2, sort_keys=True))
        self._finish_ledger(run_id, code, report, context)
        return code

    @staticmethod
    def _start_ledger(ledger: str, args) -> Optional[int]:
        if not ledger:
            return None
        path = Path(ledger)
        if not path.is_absolute():
            path = Path.cwd() / path
        use_database(f"sqlite:///{path}")
        init_db()
        arguments = {key: value for key, value in vars(args).items() if key != "command"}
        with session_factory() as session:
            run = RunCRUD.start(session, args.command, arguments, args.seed)
            logger.debug(f"Ledger run {run.id} started in {path}")
            return run.id

    @staticmethod
    def _finish_ledger(run_id: Optional[int], code: int, report: dict, context: RunContext) -> None:
        if run_id is None:
            return
        with session_factory() as session:
            RunCRUD.finish(session, run_id, code, report)
            if context.bench_rows:
                BenchRecordCRUD.add_many(session, run_id, context.bench_rows)
