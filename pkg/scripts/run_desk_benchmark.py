"""Run the desk-scale PD/SNN/DNN/ResNet comparison and print the summary.

    python scripts/run_desk_benchmark.py [--config FILE] [--out DIR] [--duration S]
"""

import argparse
import tempfile
from importlib import resources
from pathlib import Path

from resnet_adaptive.cli import main


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    default = resources.files("resnet_adaptive").joinpath("configs/desk_benchmark.cfg")
    p.add_argument("--config", default=str(default))
    p.add_argument("--out", default="results/desk")
    p.add_argument("--duration", type=float, default=None, help="override the run length in seconds")
    p.add_argument("--workers", type=int, default=4)
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    cfg = Path(args.config)
    if args.duration is not None:
        text = "\n".join(
            f"duration = {args.duration}" if line.startswith("duration") else line
            for line in cfg.read_text().splitlines()
        )
        cfg = Path(tempfile.mkdtemp()) / cfg.name
        cfg.write_text(text + "\n")
    raise SystemExit(main(["bench", str(cfg), "--out", args.out, "--workers", str(args.workers)]))
