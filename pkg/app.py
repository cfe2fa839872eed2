"""
Command-line entry point for the near-equality mass laboratory.

Usage:
    python app.py sweep scenarios/schwarzschild.yaml
    python app.py check
"""
import sys
from pathlib import Path

# Add the project root to path
sys.path.insert(0, str(Path(__file__).parent))

from src.experiments.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
