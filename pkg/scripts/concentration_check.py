"""Monte Carlo tail of KL_inf for uniform{0,1} samples against the deviation bound."""

import sys
from pathlib import Path

from klinf_bai.bench_cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "concentration.toml"

if __name__ == "__main__":
    sys.exit(main(["concentration", "--config", str(CONFIG)] + sys.argv[1:]))
