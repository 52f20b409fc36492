import argparse
import logging
import sys
from typing import List, Optional

from mirrorsim.commands import curve, params, sweep, validate
from mirrorsim.config import load_run_config, settings
from mirrorsim.errors import MirrorSimError
from mirrorsim.instrumentation import log_timing

logger = logging.getLogger(__name__)

COMMANDS = (curve, params, validate, sweep)


def configure_logging(verbose: bool = False):
    level = logging.DEBUG if verbose or settings.debug else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.app_name,
        description="Fringe visibility of a photon-mirror superposition under collapse-type decoherence",
    )
    parser.add_argument("--version", action="version", version=f"{settings.app_name} {settings.version}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS:
        module.register(subparsers)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch the subcommand and map failures to exit codes."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        cfg = load_run_config(args.config, overrides={"out": args.out, "seed": args.seed})
        with log_timing(args.command, logger):
            return args.handler(cfg)
    except MirrorSimError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"{settings.app_name}: error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        print(f"{settings.app_name}: internal error: {e}", file=sys.stderr)
        return 3


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
