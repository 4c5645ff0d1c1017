"""
Shared plumbing for the management commands and the ``python -m rcm`` entry point.
"""
import logging
import sys
from typing import List, Optional, Sequence, Tuple

from django.core.management import call_command
from django.core.management.base import CommandError

from .runtime import RunConfig, RunResult

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BOTTOM = 3
EXIT_MISMATCH = 4
EXIT_BACKEND = 5

COMMANDS = ("run", "tm", "atm", "sat", "scaffold")

USAGE = (
    "usage: rcm [--config FILE] <command> [options]\n"
    "commands:\n"
    "  run --generator echo|llm --prompt TEXT\n"
    "  tm direct|recursive|summarize|win --machine NAME --input STR\n"
    "  atm eval --machine NAME --input STR\n"
    "  sat solve|gen-traces|bench ...\n"
    "  scaffold run --system FILE --entry INDEX --input STR --space L\n"
)


def usage_error(message: str) -> CommandError:
    return CommandError(message, returncode=EXIT_USAGE)


def bottom_error(result: RunResult) -> CommandError:
    return CommandError(f"run undefined: {result.describe()} ({result.trace.record()})", returncode=EXIT_BOTTOM)


def mismatch_error(got, expected) -> CommandError:
    return CommandError(f"oracle mismatch: got {got}, expected {expected}", returncode=EXIT_MISMATCH)


def add_run_arguments(parser):
    """Flags overriding the configured runtime limits"""
    parser.add_argument('--max-steps', type=int)
    parser.add_argument('--max-depth', type=int)
    parser.add_argument('--max-local-space', type=int)
    parser.add_argument('--no-loop-detection', action='store_true')
    parser.add_argument('--record-steps', action='store_true')


def run_config(options, **overrides) -> RunConfig:
    """Flags win over settings, which already resolved env over the config file."""
    values = {
        'max_steps': options.get('max_steps'),
        'max_depth': options.get('max_depth'),
        'max_local_space': options.get('max_local_space'),
        'record_steps': options.get('record_steps') or None,
    }
    if options.get('no_loop_detection'):
        values['loop_detection'] = False
    values.update(overrides)
    try:
        return RunConfig.from_settings(**values)
    except ValueError as exc:
        raise usage_error(str(exc)) from exc


def dispatch(argv: Sequence[str], stdout=None, stderr=None) -> int:
    """Run one command line and return its exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        stderr.write(USAGE)
        return EXIT_USAGE if not argv else EXIT_OK
    if argv[0] not in COMMANDS:
        stderr.write(f"unknown command {argv[0]!r}\n{USAGE}")
        return EXIT_USAGE
    try:
        call_command(argv[0], *argv[1:], stdout=stdout, stderr=stderr)
    except CommandError as exc:
        stderr.write(f"{exc}\n")
        # argument parsing failures surface with the default code
        return exc.returncode if exc.returncode != 1 else EXIT_USAGE
    return EXIT_OK


def split_config(argv: Sequence[str]) -> Tuple[Optional[str], List[str]]:
    """Pull a leading ``--config PATH`` (or ``--config=PATH``) off the command line."""
    argv = list(argv)
    if argv and argv[0].startswith("--config="):
        return argv[0].split("=", 1)[1], argv[1:]
    if argv and argv[0] == "--config":
        if len(argv) < 2:
            raise usage_error("--config needs a path")
        return argv[1], argv[2:]
    return None, argv


def main(argv: Optional[Sequence[str]] = None) -> int:
    import os
    from pathlib import Path

    import django

    try:
        path, argv = split_config(sys.argv[1:] if argv is None else argv)
    except CommandError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    if path is not None:
        if not Path(path).is_file():
            sys.stderr.write(f"no config file at {path!r}\n")
            return EXIT_USAGE
        # settings read RCM_CONFIG once, at setup
        os.environ["RCM_CONFIG"] = path
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'recursion_project.settings')
    django.setup()
    return dispatch(argv)
