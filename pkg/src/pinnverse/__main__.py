"""Module entry point: ``python -m pinnverse``."""

import sys
from typing import List, Optional


def main(argv: Optional[List[str]] = None) -> int:
    from pinnverse.cli.main import main as cli_main

    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
