"""Entry point for python -m smoothclimb."""

import sys

from smoothclimb.cli import main

if __name__ == "__main__":
    sys.exit(main())
