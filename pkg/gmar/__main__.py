"""Allow `python -m gmar <subcommand>`."""
import sys

from gmar.cli import main

if __name__ == "__main__":
    sys.exit(main())
