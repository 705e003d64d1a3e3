"""Mean stopping time over the lower bound at delta in {0.1, 0.01, 0.001}."""

import sys
from pathlib import Path

from klinf_bai.bench_cli import main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "sweep_delta.toml"

if __name__ == "__main__":
    sys.exit(main(["sweep-delta", "--config", str(CONFIG)] + sys.argv[1:]))
