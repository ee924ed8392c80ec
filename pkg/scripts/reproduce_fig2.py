#!/usr/bin/env python
"""Covariance versus LO phase for the default impure squeezed state."""
import argparse
import sys

from homodyne_cov import experiments as ex
from homodyne_cov.traces import DetectorNoiseModel


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=1650)
    p.add_argument("--phases", type=int, default=64)
    p.add_argument("--en-variance", type=float, default=0.01, help="per-detector EN variance")
    p.add_argument("--out", default="-")
    args = p.parse_args()

    base = ex.default_config(n_samples=args.samples, seed=args.seed,
                             noise=DetectorNoiseModel.symmetric(args.en_variance))
    res = ex.run_phase_scan(base, ex.default_phases(args.phases))
    text = res.to_csv()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        open(args.out, "w").write(text)
    print(f"{res.n_passed}/{len(res.rows)} rows within 4 SE of the analytic covariance", file=sys.stderr)


if __name__ == "__main__":
    main()
