"""Effect of removing tr H / N before sampling, for Hermitian matrices with a large trace.

    python3 scripts/shift_gain.py --dim 32 --offset 3 --m 16
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass

import numpy as np

from hsim import generate
from hsim.cli import run_trials
from hsim.matrix import HermitianMatrix
from hsim.sampling import seeded_rng


@dataclass
class ShiftConfig:
    dim: int = 32
    offset: float = 3.0
    m: int = 16
    t: float = 1.0
    eps: float = 0.1
    trials: int = 40
    matrices: int = 5
    seed: int = 0


def run(cfg: ShiftConfig) -> list[tuple[float, float]]:
    rng = seeded_rng(cfg.seed, 2**32)
    out = []
    for _ in range(cfg.matrices):
        base = generate.hermitian(cfg.dim, rng, spectral_norm=1.0)
        h = HermitianMatrix.from_dense(base.dense + cfg.offset * np.eye(cfg.dim))
        psi = generate.random_state(cfg.dim, rng)
        kw = dict(t=cfg.t, eps=cfg.eps, delta=0.1, trials=cfg.trials, seed=cfg.seed, m=cfg.m)
        direct = run_trials("general", h, psi, **kw)["median_error"]
        shifted = run_trials("general-shifted", h, psi, **kw)["median_error"]
        out.append((direct, shifted))
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, val in asdict(ShiftConfig()).items():
        ap.add_argument(f"--{name}", type=type(val), default=val)
    cfg = ShiftConfig(**vars(ap.parse_args(argv)))
    print("matrix  median_direct  median_shifted")
    for i, (d, s) in enumerate(run(cfg)):
        print(f"{i:>6}  {d:13.4g}  {s:14.4g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
