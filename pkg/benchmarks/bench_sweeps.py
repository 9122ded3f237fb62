"""Sweep throughput benchmark: Metropolis sweeps/sec on the disc example at increasing n."""

import sys
import time
import warnings
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from ensemble_ldp.domains import Disc, DomainGrid
from ensemble_ldp.ensembles import run_chain
from ensemble_ldp.fields import FieldSpec


def main():
    grid = DomainGrid.build(Disc(2.0), 60)
    field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0, tag="disc-quadratic")
    n_sweeps = 2000
    for n in [8, 16, 32, 64]:
        start = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            chain = run_chain(n, field, grid, seed=1, sweeps=n_sweeps, burn_in=500)
        elapsed = time.perf_counter() - start
        print(f"n={n:>3} -> {n_sweeps / elapsed:>8.0f} sweeps/sec ({n_sweeps} sweeps in {elapsed:.2f}s, "
              f"acceptance {chain.stats.acceptance_rate:.3f})")
    print("Done.")


if __name__ == "__main__":
    main()
