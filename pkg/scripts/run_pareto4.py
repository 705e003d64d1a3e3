"""Replicated runs on the four-arm Pareto instance (equivalent to `bai run`)."""

import sys
from pathlib import Path

from klinf_bai.bench_cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "pareto4.toml"

if __name__ == "__main__":
    sys.exit(main(["run", "--config", str(CONFIG)] + sys.argv[1:]))
