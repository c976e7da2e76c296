"""Noise-level sweep for one manufactured case; prints the error table and fitted slopes.

    python3 scripts/rate_study.py backward-heat --deltas 1e-1 1e-2 1e-3 --grid nx=121 nt=41
"""

import argparse

from qrm.experiments import CASES, convergence_study


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("case", choices=sorted(CASES))
    ap.add_argument("--deltas", type=float, nargs="+", default=[1e-1, 1e-2, 1e-3])
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--grid", nargs="*", default=[], help="factory overrides, e.g. nx=121")
    args = ap.parse_args()
    kw = {k: int(v) for k, v in (s.split("=") for s in args.grid)}
    rep = convergence_study(CASES[args.case](**kw), args.deltas, args.alpha, args.seed)

    keys = sorted(rep.baseline)
    print(f"{rep.case} ({rep.kind}), designated {rep.designated}")
    print("baseline  " + "  ".join(f"{k}={rep.baseline[k]:.3e}" for k in keys))
    print(f"{'delta':>9} {'gamma':>9} " + " ".join(f"{k:>22}" for k in keys))
    for r in rep.rows:
        print(f"{r.delta:9.1e} {r.gamma:9.1e} " + " ".join(f"{r.errors[k]:22.4e}" for k in keys))
    for k, f in rep.slopes.items():
        print(f"slope {k}: {f.slope:.3f} (r2 {f.r2:.3f}, n={f.n})")
    print(f"theory exponent {rep.theory_exponent:.4g}, beta {rep.beta:.4g} (in range: {rep.beta_in_range})")
    if rep.beta_consistent is not None:
        print(f"beta consistent with the log-convexity derivation: {rep.beta_consistent:.4g}")
    if rep.log_fit is not None:
        print(f"error vs 1/sqrt(ln(1/delta)): slope {rep.log_fit.slope:.3f}, r2 {rep.log_fit.r2:.3f}")


if __name__ == "__main__":
    main()
