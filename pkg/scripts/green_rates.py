"""Discrete Green function error table: E2 and E1 against n, with log-log slopes.

Usage: python scripts/green_rates.py [--T 0.5] [--n-list 8,16,32,64] [--J 512]
"""
import argparse

from chldp.green import green_error_study


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--n-list", default="8,16,32,64")
    p.add_argument("--J", type=int, default=512)
    args = p.parse_args()
    n_list = [int(v) for v in args.n_list.split(",")]
    tab = green_error_study(args.T, n_list, J=args.J)
    print("n,E2,E1")
    for n, e2, e1 in zip(tab.n_list, tab.E2, tab.E1):
        print(f"{n},{e2:.6e},{e1:.6e}")
    print(f"# slope E2 {tab.slope_E2:.4f}, slope E1 {tab.slope_E1:.4f}")


if __name__ == "__main__":
    main()
