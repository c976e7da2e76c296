"""Recover an initial pressure profile from lateral wave traces; noisy run plus a noiseless gamma sweep."""

import argparse
import dataclasses

from qrm.experiments import TatConfig, tat_reconstruct


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--delta", type=float, default=1e-2)
    ap.add_argument("--T", type=float, default=1.5)
    ap.add_argument("--sweep", type=float, nargs="*", default=[1e-4, 1e-6, 1e-8])
    args = ap.parse_args()
    cfg = TatConfig(T=args.T, delta=args.delta)
    res = tat_reconstruct(cfg)
    print(f"delta={cfg.delta:g} gamma={res.gamma:g}: " + ", ".join(f"{k}={v:.4e}" for k, v in res.errors.items()))
    for g in args.sweep:
        r = tat_reconstruct(dataclasses.replace(cfg, delta=0.0, gamma=g))
        print(f"noiseless gamma={g:g}: relative_error_l2_initial={r.errors['relative_error_l2_initial']:.4e}")


if __name__ == "__main__":
    main()
