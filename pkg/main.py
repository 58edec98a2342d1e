"""
SLT Stack
Entry point: python main.py <subcommand> [options]
"""

import sys

from sltstack.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
