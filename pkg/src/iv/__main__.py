"""Allow `python -m iv` as an alternative to the `iv` entry point."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
