"""Command-line front end.

Every subcommand writes CSV (and sometimes JSON) into the output directory,
taken from ``--output-dir``, the config file, ``$CHLDP_OUTPUT_DIR`` or the
working directory, in that order.  Exit codes: 0 success, 2 config error
(including failed assumption checks), 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .green import green_error_study
from .model import validate_assumptions
from .rare_events import ldp_fit
from .rate import (convergence_scan, gramian_continuum, level_for_rate, linear_rate,
                   rate_at_y0, rate_curve)
from .sde import BLOCK_SIZE, NoiseIncrements, simulate_paths
from .skeleton import NondegeneracyError
from .timestep import StiffnessError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str, cfg: ExperimentConfig, command: str, columns: Sequence[str],
              rows: Sequence[Sequence]) -> str:
    lines = [f"# chldp {__version__} command={command} config={cfg.digest()}",
             ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def write_json(path: str, cfg: ExperimentConfig, command: str, payload: dict) -> str:
    payload = {"version": __version__, "command": command, "config": cfg.digest(), **payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _out(cfg: ExperimentConfig, name: str) -> str:
    d = cfg.resolved_output_dir()
    os.makedirs(d, exist_ok=True)
    return os.path.join(d, name)


# -- subcommands ---------------------------------------------------------------------

def cmd_validate(cfg: ExperimentConfig) -> int:
    report = validate_assumptions(cfg.coefficients())
    write_json(_out(cfg, "validate.json"), cfg, "validate", report.as_dict())
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    return EXIT_OK if report.all_passed else EXIT_CONFIG


def _require_assumptions(cfg: ExperimentConfig, nondegenerate: bool = True) -> None:
    report = validate_assumptions(cfg.coefficients(), require_nondegenerate=nondegenerate)
    if not report.all_passed:
        bad = ", ".join(c.name for c in report.checks if not c.passed)
        raise ConfigError(f"assumption checks failed: {bad}")


def cmd_simulate(cfg: ExperimentConfig) -> int:
    _require_assumptions(cfg, nondegenerate=False)
    coeffs = cfg.coefficients()
    n, m, T = cfg.n, cfg.m, cfg.T
    total = cfg.samples
    n_blocks = -(-total // BLOCK_SIZE)

    def job(b):
        size = min(BLOCK_SIZE, total - b * BLOCK_SIZE)
        noise = NoiseIncrements.block(cfg.seed, b, m, n, T, size)
        return simulate_paths(coeffs, noise, cfg.eps, keep_path=cfg.full_path)

    results = _map(job, range(n_blocks), cfg.worker_count)
    nodes = (2 * np.arange(1, n + 1) - 1) * np.pi / (2 * n)
    rows = []
    if cfg.full_path:
        times = np.linspace(0.0, T, m + 1)
        for b, res in enumerate(results):
            for p in range(res.states.shape[1]):
                for j, t in enumerate(times):
                    for k in range(n):
                        rows.append((b * BLOCK_SIZE + p, t, k + 1, res.states[j, p, k]))
        write_csv(_out(cfg, "simulate_paths.csv"), cfg, "simulate",
                  ["path", "t", "k", "value"], rows)
    else:
        for b, u_T in enumerate(results):
            for p in range(u_T.shape[0]):
                for k in range(n):
                    rows.append((b * BLOCK_SIZE + p, k + 1, nodes[k], u_T[p, k]))
        write_csv(_out(cfg, "simulate_endpoints.csv"), cfg, "simulate",
                  ["path", "k", "x", "value"], rows)
    return EXIT_OK


def _map(fn, items, workers):
    items = list(items)
    if workers > 1 and len(items) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def cmd_rate(cfg: ExperimentConfig) -> int:
    _require_assumptions(cfg)
    coeffs = cfg.coefficients()
    y0 = rate_at_y0(coeffs, cfg.n, cfg.m, cfg.T, cfg.xbar)
    if cfg.y_list:
        ys = [float(v) for v in cfg.y_list]
    elif cfg.y is not None:
        ys = [float(cfg.y)]
    else:
        ys = [y0 + cfg.y_offset]
    results = rate_curve(coeffs, cfg.n, cfg.m, cfg.T, cfg.xbar, ys)
    cols = ["y", "I", "iterations", "grad_norm", "residual", "converged", "inf_above"]
    rows = [(r.y, r.value, r.iterations, r.grad_norm, r.residual, r.converged, r.inf_above)
            for r in results]
    write_csv(_out(cfg, "rate.csv"), cfg, "rate", cols, rows)
    for r in results:
        print(f"y={r.y:.6g} I={r.value:.8g} converged={r.converged}")
    if any(not np.isfinite(r.value) for r in results):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_converge(cfg: ExperimentConfig) -> int:
    _require_assumptions(cfg)
    coeffs = cfg.coefficients()
    rows_out = convergence_scan(coeffs, cfg.n_list, cfg.T, cfg.xbar, y=cfg.y,
                                y_offset=cfg.y_offset, m_base=cfg.m_base, n_base=cfg.n_base,
                                threads=cfg.worker_count)
    cols = ["n", "m", "I", "diff_to_finest", "converged", "grad_norm"]
    rows = [(r.n, r.m, r.value, r.diff_to_finest, r.converged, r.grad_norm) for r in rows_out]
    zero_start = np.allclose(coeffs.u0(np.linspace(0.0, np.pi, 65)), 0.0)
    if coeffs.is_linear and coeffs.names.get("sigma") == "one" and zero_start:
        y = cfg.y if cfg.y is not None else cfg.y_offset
        i_inf = linear_rate(y, gramian_continuum(cfg.T, cfg.xbar, cfg.J))
        cols.append("I_continuum")
        rows = [r + (i_inf,) for r in rows]
    write_csv(_out(cfg, "converge.csv"), cfg, "converge", cols, rows)
    for r in rows:
        print(",".join(_fmt(v) for v in r))
    return EXIT_OK if all(np.isfinite(r.value) for r in rows_out) else EXIT_NUMERIC


def run_mc_verify(cfg: ExperimentConfig):
    coeffs = cfg.coefficients()
    n, m, T, xbar = cfg.n, cfg.m, cfg.T, cfg.xbar
    y = cfg.y if cfg.y is not None else level_for_rate(coeffs, n, m, T, xbar, cfg.target_rate)
    curve = rate_curve(coeffs, n, m, T, xbar, list(y + np.linspace(0.0, 1.5, 7)))
    tilt = curve[0].control if cfg.importance_sampling else None
    fit = ldp_fit(coeffs, n, m, T, xbar, y, cfg.eps_list, cfg.samples, curve[0].inf_above,
                  seed=cfg.seed, tilt=tilt, threads=cfg.worker_count)
    return y, fit


def cmd_mc_verify(cfg: ExperimentConfig) -> int:
    _require_assumptions(cfg)
    y, fit = run_mc_verify(cfg)
    cols = ["eps", "P_hat", "stderr", "minus_eps_logP", "I_inf", "rel_gap"]
    rows = [tuple(r[c] for c in cols) for r in fit.rows()]
    write_csv(_out(cfg, "mc_verify.csv"), cfg, "mc-verify", cols, rows)
    summary = {"y": y, "limit": fit.limit, "slope": fit.slope, "I_inf": fit.rate_inf,
               "rel_gap": fit.rel_gap, "excluded_eps": fit.excluded,
               "weight_audit": [e.weight_audit_ok for e in fit.estimates]}
    write_json(_out(cfg, "mc_verify.json"), cfg, "mc-verify", summary)
    print(f"y={y:.6g} extrapolated={fit.limit:.6g} I_inf={fit.rate_inf:.6g} "
          f"rel_gap={fit.rel_gap:.3%}")
    return EXIT_OK if np.isfinite(fit.limit) else EXIT_NUMERIC


def cmd_green_check(cfg: ExperimentConfig) -> int:
    tab = green_error_study(cfg.T, cfg.n_list, J=cfg.J)
    cols = ["n", "E2", "E1", "slope_E2", "slope_E1"]
    rows = [(n, e2, e1, tab.slope_E2, tab.slope_E1) for n, e2, e1 in zip(tab.n_list, tab.E2, tab.E1)]
    write_csv(_out(cfg, "green_check.csv"), cfg, "green-check", cols, rows)
    print(f"slope E2 = {tab.slope_E2:.4f}, slope E1 = {tab.slope_E1:.4f}")
    return EXIT_OK


def cmd_props(cfg: ExperimentConfig) -> int:
    from .props import run_all
    results = run_all()
    payload = {"all_passed": all(r.passed for r in results),
               "results": [{"name": r.name, "passed": bool(r.passed), "worst": float(r.worst),
                            "detail": r.detail} for r in results]}
    write_json(_out(cfg, "props.json"), cfg, "props", payload)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} (worst {r.worst:.3e}) {r.detail}")
    return EXIT_OK if payload["all_passed"] else EXIT_NUMERIC


COMMANDS = {
    "simulate": cmd_simulate, "rate": cmd_rate, "converge": cmd_converge,
    "mc-verify": cmd_mc_verify, "green-check": cmd_green_check, "validate": cmd_validate,
    "props": cmd_props,
}


def _floats(s: str) -> list:
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s: str) -> list:
    return [int(v) for v in s.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chldp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"chldp {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="TOML config file; flags override its values")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker threads (0 = all cores)")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--T", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--xbar", type=float)
    p.add_argument("--y", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--n-list", type=_ints, dest="n_list")
    p.add_argument("--eps-list", type=_floats, dest="eps_list")
    p.add_argument("--y-list", type=_floats, dest="y_list")
    p.add_argument("--m-base", type=int, dest="m_base")
    p.add_argument("--b")
    p.add_argument("--sigma")
    p.add_argument("--sigma-param", type=float, dest="sigma_param")
    p.add_argument("--u0")
    p.add_argument("--u0-params", type=_floats, dest="u0_params")
    p.add_argument("--full-path", action="store_true", default=None, dest="full_path")
    p.add_argument("--no-is", action="store_false", default=None, dest="importance_sampling")
    p.add_argument("--output-dir", dest="output_dir")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StiffnessError, NondegeneracyError, FloatingPointError, ValueError) as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
