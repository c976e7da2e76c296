"""Fitted Carleman constant against lambda for bump test functions."""

from qrm.experiments import CarlemanCheckConfig, carleman_check

if __name__ == "__main__":
    diag = carleman_check(CarlemanCheckConfig())
    print(f"{'lambda':>8} {'C_fit':>12} test")
    for row in diag.rows():
        print(f"{row['lam']:8.1f} {row['c_fit']:12.4e} {row['test']}")
