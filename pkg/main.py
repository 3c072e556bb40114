"""
Main entry point for capture analysis of unimodal maps
"""
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv
from loguru import logger

# Add src to path
src_path = Path(__file__).parent / "src"
sys.path.insert(0, str(src_path))

from src.__version__ import __version__
from src.cli.commands import build_parser, run_command
from src.utils.config_loader import load_config


def configure_logging(config: dict, level: Optional[str] = None, log_file: bool = True):
    """stderr sink at the configured level plus an optional rotating file sink"""
    logging_config = config.get("logging", {})
    level = level or logging_config.get("level", "INFO")

    logger.remove()
    logger.add(sys.stderr, level=level)

    file_pattern = logging_config.get("file")
    if log_file and file_pattern:
        logger.add(
            file_pattern,
            rotation=logging_config.get("rotation", "50 MB"),
            retention=logging_config.get("retention", "10 days"),
            level=level
        )


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, load configuration and run one subcommand

    Returns:
        Process exit code
    """
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.version:
        print(__version__)
        return 0
    if args.command is None:
        parser.print_help()
        return 1

    config = load_config(args.config or os.getenv("CONFIG_PATH", "config/config.yaml"))
    configure_logging(config, level=args.log_level, log_file=not args.no_log_file)

    logger.info(f"Starting capture analysis v{__version__}")
    return run_command(args, config)


if __name__ == "__main__":
    sys.exit(main())
