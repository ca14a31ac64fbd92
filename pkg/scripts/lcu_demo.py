"""Walk-based LCU on a small random Hamiltonian: per-segment orders and the final error.

    python3 scripts/lcu_demo.py --dim 6 --t 3 --eps 1e-8
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, dataclass

from hsim import generate
from hsim.lcu import lcu_evolve
from hsim.oracle import exact_evolve, state_error
from hsim.sampling import seeded_rng


@dataclass
class LcuConfig:
    dim: int = 6
    t: float = 2.0
    eps: float = 1e-6
    seed: int = 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for name, val in asdict(LcuConfig()).items():
        ap.add_argument(f"--{name}", type=type(val), default=val)
    cfg = LcuConfig(**vars(ap.parse_args(argv)))
    rng = seeded_rng(cfg.seed, 2**32)
    h = generate.hermitian(cfg.dim, rng, spectral_norm=1.0)
    psi = generate.random_state(cfg.dim, rng)
    out, rep = lcu_evolve(h, psi, cfg.t, cfg.eps, return_report=True)
    err = state_error(out, exact_evolve(h, psi, -cfg.t).state)
    print(f"||H||_1 after diagonal shift {rep.diagonal_shift:.3f}: {rep.lambda1:.4f}")
    print("segment       z   k  sum|alpha|     bound")
    for i, s in enumerate(rep.segments):
        print(f"{i:>7}  {s.z:6.3f}  {s.k:2d}  {s.alpha_l1:10.4f}  {s.bound:8.2e}")
    print(f"final error vs exp(-iHt) psi: {err:.2e} (eps {cfg.eps:g})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
