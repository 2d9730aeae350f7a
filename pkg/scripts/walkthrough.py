"""Run the five-hop walkthrough through the CLI and print the verify report.

    python scripts/walkthrough.py [--excursion] [--workdir DIR]
"""

import argparse
import subprocess
import sys
import tempfile
from pathlib import Path

from blockcoldchain.walkthrough import Walkthrough, run


def invoke(args):
    proc = subprocess.run([sys.executable, "-m", "blockcoldchain.cli", *args], capture_output=True, text=True)
    return proc.returncode, proc.stdout + proc.stderr


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--excursion", action="store_true", help="log a 15.00 C excursion on the truck leg")
    parser.add_argument("--workdir", type=Path, default=None)
    opts = parser.parse_args()
    workdir = opts.workdir or Path(tempfile.mkdtemp(prefix="bcc-walk-"))
    code, output = run(Walkthrough(workdir, excursion=opts.excursion), invoke)
    print(output)
    print(f"verify exit code: {code} (workdir {workdir})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
