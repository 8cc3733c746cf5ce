"""Pairwise-distance spread of generated cohorts vs interpolation count.

Loads a trained checkpoint, generates cohorts by convex combination of
2, 4, and 8 latent codes, and tabulates the distribution of pairwise
Chamfer distances for each setting.  Averaging more codes pulls shapes
toward the family mean, so the spread should shrink as m grows.

    python scripts/cohort_variance.py --checkpoint runs/family/model.nsdf
"""

import argparse
import time

import numpy as np

from sdfshapes import generate_cohort, load_checkpoint, pairwise_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--checkpoint", required=True)
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--interp-counts", default="2,4,8")
    ap.add_argument("--resolution", type=int, default=40)
    ap.add_argument("--eval-points", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-prefix", default=None,
                    help="write per-m reports to PREFIX_m<count>.csv")
    args = ap.parse_args()

    ck = load_checkpoint(args.checkpoint)
    ms = [int(t) for t in args.interp_counts.split(",")]
    print(f"{'m':>3} {'pairs':>6} {'mean':>10} {'std':>10} {'var':>10}")
    for m in ms:
        t0 = time.time()
        meshes, _ = generate_cohort(ck, args.count, m, args.seed,
                                    args.resolution)
        rep = pairwise_report(meshes, args.eval_points, args.seed)
        s = rep.summary()
        print(f"{m:>3} {s['count']:>6} {s['mean']:>10.3e} {s['std']:>10.3e} "
              f"{s['std'] ** 2:>10.3e}   ({time.time() - t0:.0f}s)")
        if args.out_prefix:
            rep.to_csv(f"{args.out_prefix}_m{m}.csv")


if __name__ == "__main__":
    main()
