"""Mode amplification of an unregularized backward heat march."""

from qrm.experiments import backward_instability_demo

if __name__ == "__main__":
    for r in backward_instability_demo([1, 2, 3, 4, 5], 0.1):
        print(f"n={r.n}: exp(n^2 T)={r.analytic:.6g} observed={r.observed:.6g} gap={r.relative_gap:.2%}")
