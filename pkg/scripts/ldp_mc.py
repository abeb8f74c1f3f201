"""Monte Carlo check of -eps log P against inf I^n for the linear and cubic models.

Usage: python scripts/ldp_mc.py [--samples 100000] [--threads 0] [--output-dir out]
Writes mc_verify.csv / mc_verify.json per model into subdirectories of the output directory.
"""
import argparse
import os

from chldp.cli import main as cli_main


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", default="100000")
    p.add_argument("--threads", default="0")
    p.add_argument("--seed", default="0")
    p.add_argument("--output-dir", default="ldp_mc_out")
    args = p.parse_args()
    models = {
        "linear": ["--b", "zero", "--u0", "constant", "--u0-params", "0"],
        "cubic": ["--b", "cubic", "--u0", "cos", "--u0-params", "2,0.1"],
    }
    for name, flags in models.items():
        out = os.path.join(args.output_dir, name)
        print(f"[{name}]")
        code = cli_main(["mc-verify", *flags, "--samples", args.samples, "--threads", args.threads,
                         "--seed", args.seed, "--output-dir", out])
        if code:
            raise SystemExit(code)


if __name__ == "__main__":
    main()
