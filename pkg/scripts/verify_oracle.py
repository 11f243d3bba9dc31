"""Compare the optimized exact simulation with the closed forms.

For every family and n the script reports the gap to the family closed form,
to the general bound and to the settings maximum. Use
``--sources independent`` to draw each source separately."""
import argparse
import itertools
import time

import numpy as np

from starnoise.cli import FAMILY_KIND, _draw_source
from starnoise.criteria import StarConfig, s_star, s_star_max, s_star_noisy
from starnoise.noise import effective_source_state
from starnoise.oracle import optimize_settings
from starnoise.qstate import state_spectrum


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--families", nargs="+", default=["gate", "ad", "pd"])
    parser.add_argument("--n", nargs="+", type=int, default=[1, 2, 3])
    parser.add_argument("--draws", type=int, default=20)
    parser.add_argument("--restarts", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sources", choices=("consistent", "independent"), default="independent")
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'family':<7}{'n':>3}{'max |oracle-closed|':>22}{'max (oracle-general)':>24}{'max |oracle-settings max|':>28}{'time':>8}")
    for family, n in itertools.product(args.families, args.n):
        kind = FAMILY_KIND[family]
        start = time.perf_counter()
        closed, general, smax = [], [], []
        for draw in range(args.draws):
            if args.sources == "consistent":
                srcs = (_draw_source(family, rng),) * n
            else:
                srcs = tuple(_draw_source(family, rng) for _ in range(n))
            cfg = StarConfig(srcs, kind)
            states = [effective_source_state(s, kind) for s in srcs]
            spectra = [state_spectrum(r) for r in states]
            s = optimize_settings(states, srcs, n, restarts=args.restarts, seed=draw).result.s
            closed.append(abs(s - s_star(cfg).s))
            general.append(s - s_star_noisy(cfg, spectra).s)
            smax.append(abs(s - s_star_max(cfg, spectra).s))
        print(f"{family:<7}{n:>3}{max(closed):>22.3e}{max(general):>24.3e}{max(smax):>28.3e}"
              f"{time.perf_counter() - start:>7.1f}s")


if __name__ == "__main__":
    main()
