"""Run the acceptance tests and print one pass/fail line per criterion.

    python3 scripts/run_acceptance.py
"""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    sys.exit(subprocess.call([sys.executable, "-m", "pytest", "-q", "-s",
                              str(ROOT / "tests" / "test_acceptance.py")], cwd=ROOT))
