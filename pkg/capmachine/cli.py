"""Command-line front end: assemble, link, run images, scenarios and suites."""

import argparse
import logging
import os
import sys
from typing import NoReturn

from dacite import DaciteError
import yaml

from .assembler import ExpandOptions, parse
from .config import Config, TraceConfig, parse_config, update_config
from .linker import (
    build_component,
    format_image,
    format_object,
    link,
    load_layout,
    parse_image,
    parse_object,
)
from .machine import run
from .monitoring.callbacks.trace import TraceWriter
from .monitoring.event_bus import reset_event_bus
from .scenarios import (
    Variant,
    build_scenario,
    default_manifest,
    parse_manifest,
    run_scenario,
    run_suite,
)
from .scenarios.harness import result_from_outcome
from .utils import close_trace_writer, setup_monitoring, step_sink

logger = logging.getLogger(__name__)

EXIT_USAGE = 4


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 4."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="capmachine", description="Capability machine toolchain"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Log debug output")
    parser.add_argument(
        "-f",
        "--file",
        help="Path to YAML configuration file",
        required=False,
        default=None,
    )
    parser.add_argument(
        "-kvp",
        "--key_value_pairs",
        action="append",
        help="Key-value pair to override in the configuration, repeatable (nested configs can be accessed via '.')",
        required=False,
        default=None,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    asm = commands.add_parser("asm", help="Assemble a source file into an object file")
    asm.add_argument("input", help="Assembly source")
    asm.add_argument("-o", "--output", default=None, help="Object file (default: stdout)")
    asm.add_argument("--name", default=None, help="Unit name when the source has no .unit")
    asm.add_argument("--no-clear-stack", action="store_true")
    asm.add_argument("--no-check-global", action="store_true")
    asm.add_argument("--no-check-stack", action="store_true")

    link_cmd = commands.add_parser("link", help="Link object files into an image")
    link_cmd.add_argument("objects", nargs="+", help="Object files")
    link_cmd.add_argument("--layout", required=True, help="YAML layout file")
    link_cmd.add_argument("-o", "--output", default=None, help="Image file (default: stdout)")

    run_cmd = commands.add_parser("run", help="Run a linked image")
    run_cmd.add_argument("image", help="Image file")
    run_cmd.add_argument("--entry", default=None, help="Start at this export's entry")
    run_cmd.add_argument("--check-flag", default=None, help="FLAG or COMPONENT.FLAG")
    _add_run_options(run_cmd)

    scenario = commands.add_parser("scenario", help="Run one example against one adversary")
    scenario.add_argument("name", help="f1, f2, f3, g1 or g2")
    scenario.add_argument("adversary", help="Adversary name")
    scenario.add_argument(
        "--variant", default=Variant.STANDARD.value, choices=[v.value for v in Variant]
    )
    _add_run_options(scenario)

    suite = commands.add_parser("suite", help="Run a scenario manifest")
    suite.add_argument("manifest", nargs="?", default=None, help="Manifest (default: built-in)")
    suite.add_argument("--workers", type=int, default=None, help="Worker processes")
    suite.add_argument("--dump-dir", default=None, help="Dumps for mismatching runs")
    suite.add_argument("--no-progress", action="store_true")
    return parser


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--fuel", type=int, default=None, help="Step budget")
    parser.add_argument("--trace", default=None, help="Trace destination ('-' for stdout)")
    parser.add_argument("--dump", default=None, help="Write the final memory here")


def _load_config(args: argparse.Namespace) -> Config:
    config = parse_config(args.file) if args.file is not None else Config()
    if args.key_value_pairs is not None:
        update_config(config, args.key_value_pairs)
    if getattr(args, "trace", None) is not None:
        config.monitoring.enabled = True
        config.monitoring.trace = TraceConfig(path=args.trace)
    if getattr(args, "fuel", None) is not None:
        config.machine.fuel = args.fuel
    if getattr(args, "workers", None) is not None:
        config.suite.workers = args.workers
    if getattr(args, "no_progress", False):
        config.suite.show_progress = False
    return config


def _read(path: str) -> str:
    with open(path, "r") as fp:
        return fp.read()


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w") as fp:
        fp.write(text)


def _asm(args: argparse.Namespace, config: Config) -> int:
    name = args.name or os.path.splitext(os.path.basename(args.input))[0]
    options = ExpandOptions(
        clear_stack=not args.no_clear_stack,
        check_global=not args.no_check_global,
        check_stack=not args.no_check_stack,
    )
    obj = build_component(parse(_read(args.input), name), options=options)
    _write(args.output, format_object(obj))
    return 0


def _link(args: argparse.Namespace, config: Config) -> int:
    objects = [parse_object(_read(path)) for path in args.objects]
    image = link(objects, load_layout(args.layout))
    _write(args.output, format_image(image))
    return 0


def _run(args: argparse.Namespace, config: Config) -> int:
    image = parse_image(_read(args.image))
    conf = image.initial_conf(args.entry)
    flags = []
    if args.check_flag is not None:
        flags.append(image.flag_address(*image.resolve_flag(args.check_flag)))
    outcome = run(conf, config.machine.fuel, step_sink())
    result = result_from_outcome(outcome, flags)
    logger.debug("Run of %s ended with %s", args.image, result.verdict.value)
    print(f"{result.verdict.value} {result.steps}")
    if args.dump is not None:
        _write(args.dump, result.dump())
    return result.verdict.exit_code


def _scenario(args: argparse.Namespace, config: Config) -> int:
    scenario = build_scenario(
        args.name, args.adversary, Variant.parse(args.variant), config.layout, config.machine.fuel
    )
    result = run_scenario(scenario)
    print(f"{result.verdict.value} {result.steps}")
    if args.dump is not None:
        _write(args.dump, result.dump())
    return result.verdict.exit_code


def _suite(args: argparse.Namespace, config: Config) -> int:
    entries = (
        parse_manifest(_read(args.manifest)) if args.manifest is not None else default_manifest()
    )
    results = run_suite(
        entries, config.suite, config.layout, config.machine.fuel, args.dump_dir
    )
    for result in results:
        print(result.format())
    return 0 if all(result.matches for result in results) else 1


_COMMANDS = {
    "asm": _asm,
    "link": _link,
    "run": _run,
    "scenario": _scenario,
    "suite": _suite,
}


def main(argv: list[str] | None = None) -> int:
    """
    Entry-point for the command line.

    Returns the process exit code: the verdict code for runs (0 halted with
    clear flags, 1 failed, 2 out of fuel, 3 halted with a set flag), 4 for
    usage and input errors.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    writer: TraceWriter | None = None
    try:
        config = _load_config(args)
        writer = setup_monitoring(config.monitoring)
        return _COMMANDS[args.command](args, config)
    except (ValueError, OSError, DaciteError, yaml.YAMLError) as e:
        print(f"capmachine: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if writer is not None:
            close_trace_writer(writer)
        reset_event_bus()


if __name__ == "__main__":
    sys.exit(main())
