"""Time allocation solves, fit c21 + c22 n and print the implied batch sizes."""

import sys
from pathlib import Path

from klinf_bai.bench_cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "cost_fit.toml"

if __name__ == "__main__":
    sys.exit(main(["cost-fit", "--config", str(CONFIG)] + sys.argv[1:]))
