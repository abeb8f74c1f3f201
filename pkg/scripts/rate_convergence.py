"""I^n(y) along n for the cubic drift and the continuum check for the linear case.

Usage: python scripts/rate_convergence.py [--n-list 8,16,32] [--T 0.5] [--xbar 1.0]
"""
import argparse

from chldp.model import linear_coefficients, make_coefficients
from chldp.rate import convergence_scan, gramian_continuum, linear_rate


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n-list", default="8,16,32")
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--xbar", type=float, default=1.0)
    p.add_argument("--y-offset", type=float, default=0.5)
    args = p.parse_args()
    n_list = [int(v) for v in args.n_list.split(",")]

    cubic = make_coefficients(u0_params=[2.0, 0.1])
    print("model,n,m,I,diff_to_finest,converged")
    for r in convergence_scan(cubic, n_list, args.T, args.xbar, y_offset=args.y_offset):
        print(f"cubic,{r.n},{r.m},{r.value:.10g},{r.diff_to_finest:.3e},{int(r.converged)}")
    y = args.y_offset
    for r in convergence_scan(linear_coefficients(), n_list, args.T, args.xbar, y=y):
        print(f"linear,{r.n},{r.m},{r.value:.10g},{r.diff_to_finest:.3e},{int(r.converged)}")
    exact = linear_rate(y, gramian_continuum(args.T, args.xbar))
    print(f"# linear continuum value {exact:.10g}")


if __name__ == "__main__":
    main()
