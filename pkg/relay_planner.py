"""
Relay Planner Launcher

Command line entry point; see `python relay_planner.py --help`.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from src.bench.cli import main


if __name__ == "__main__":
    sys.exit(main())
