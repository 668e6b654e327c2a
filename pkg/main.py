"""
Quantum Network Coding Simulator - Main Entry Point
"""

import os
import logging
import sys
from typing import Optional, Sequence

from dotenv import load_dotenv

from api.cli import EXIT_USAGE, build_parser, dispatch

# Load environment variables
load_dotenv()

# Configure logging (stream handler on stderr; stdout carries command output)
logging.basicConfig(
    level=os.getenv("QNC_LOG_LEVEL", "INFO").upper(),
    format='%(levelname)s:     %(name)s - %(message)s',
    handlers=[logging.StreamHandler()]
)

logger = logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the subcommand and return its exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0
    if args.log_level:
        logging.getLogger().setLevel(args.log_level.upper())
    logger.debug(f"Running {args.command}")
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
