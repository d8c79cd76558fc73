"""
mbqc_crosscheck.main
====================

Entry point.
"""

from __future__ import annotations

import sys

from .cli import main as cli_main


def main() -> None:
    """Run the command line."""
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
