"""Command line driver: check, run, sweep-delta, verify, report.

Exit codes: 0 ok, 1 validation failure, 2 runtime failure, 3 verification
failure.  Output files are written with fixed float formatting and sorted
JSON keys so that identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from . import solver as slv
from . import verify as vfy
from .config import RunConfig, initial_fields
from .errors import AnisoflowError, ConfigError, HypothesisError
from .spectral import get_grid
from .tensor4 import check_hypotheses, coercivity_bounds

log = logging.getLogger("anisoflow")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3


def _f(v):
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats so the JSON stays standard."""
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)):
        o = float(o)
        return o if math.isfinite(o) else repr(o)
    return o


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), sort_keys=True, indent=2, default=_json_default) + "\n", encoding="utf-8")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_f(v) for v in r])


def output_dir(args, cfg: RunConfig) -> Path:
    out = args.out or os.environ.get("OUTPUT_DIR") or cfg.output_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    return RunConfig.load(args.config)


# single runs


def simulate(cfg: RunConfig, delta: float | None = None):
    """Run one configuration; returns (trajectory, diagnostics record or None)."""
    law = cfg.law()
    tensor = cfg.tensor()
    scfg = cfg.solver_config(delta)
    grid = get_grid(cfg.d, cfg.n)
    name, params = cfg.initial_spec()
    rho0, u0 = initial_fields(grid, law, name, params)
    traj = slv.run(scfg, tensor, law, rho0, u0)
    rec = diag.compute(traj, c0=cfg.c0, C_tilde=cfg.C_tilde) if len(traj) >= 2 else None
    return traj, rec


def _hyp_report(cfg: RunConfig):
    tensor = cfg.tensor()
    ts = np.linspace(0.0, max(cfg.t_end, 0.0), 65)
    xs = get_grid(cfg.d, cfg.n).x
    return check_hypotheses(tensor, cfg.eta, ts, xs)


def cmd_check(args) -> int:
    cfg = load_config(args)
    out = output_dir(args, cfg)
    rep = _hyp_report(cfg)
    data = rep.to_dict()
    data["scenario"] = cfg.scenario
    data["eta"] = cfg.eta
    write_json(out / "hypotheses.json", data)
    for name, msg in rep.failures:
        print(f"FAIL {name}: {msg}")
    print(f"H4 ratio {rep.h4_ratio:.6g}; coercivity margin {rep.coercivity_margin:.6g}")
    print("hypotheses: pass" if rep.passed else "hypotheses: fail")
    return EXIT_OK if rep.passed else EXIT_VALIDATION


def _run_outputs(out: Path, traj, rec, cfg: RunConfig, prefix: str = ""):
    write_csv(out / f"{prefix}timeseries.csv", diag.COLUMNS, rec.rows() if rec else [])
    summ = diag.summary(traj, rec) if rec else {"failure": traj.failure, "samples": len(traj)}
    summ["scenario"] = cfg.scenario
    summ["delta"] = traj.config.delta
    write_json(out / f"{prefix}summary.json", summ)
    return summ


def cmd_run(args) -> int:
    cfg = load_config(args)
    out = output_dir(args, cfg)
    rep = _hyp_report(cfg)
    if not rep.passed and not args.force:
        for name, msg in rep.failures:
            print(f"FAIL {name}: {msg}")
        print("refusing to run; pass --force to override")
        return EXIT_VALIDATION
    if not rep.passed:
        try:
            coercivity_bounds(cfg.tensor())
        except HypothesisError as exc:
            print(f"warning: {exc}")
    traj, rec = simulate(cfg)
    summ = _run_outputs(out, traj, rec, cfg)
    if traj.failure:
        print(f"run failed: {traj.failure['kind']} at t={traj.failure['t']:.6g}: {traj.failure['message']}")
        return EXIT_RUNTIME
    print(f"run ok: {summ['samples']} samples, {summ['steps']} steps, E(T)={summ['final']['E']:.6g}")
    return EXIT_OK


# delta sweep


def _sweep_member(cfg_text: str, delta: float):
    cfg = RunConfig.from_ini(cfg_text)
    traj, rec = simulate(cfg, delta)
    vel = None if traj.failure else np.array([traj.velocity(i) for i in range(len(traj))])
    return {
        "delta": delta,
        "times": traj.times,
        "velocity": vel,
        "rows": rec.rows() if rec else [],
        "summary": diag.summary(traj, rec) if rec else {"failure": traj.failure},
        "failure": traj.failure,
    }


def cmd_sweep_delta(args) -> int:
    cfg = load_config(args)
    out = output_dir(args, cfg)
    deltas = list(cfg.deltas)
    if len(deltas) < 3:
        raise ConfigError("[mollifier] deltas needs at least three values")
    if any(b > a for a, b in zip(deltas[:-1], deltas[1:])):
        raise ConfigError("[mollifier] deltas must be non-increasing")
    text = cfg.to_ini()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            members = list(pool.map(_sweep_member, [text] * len(deltas), deltas))
    else:
        members = [_sweep_member(text, dl) for dl in deltas]
    grid = get_grid(cfg.d, cfg.n)
    table = slv.cauchy_from_velocities(grid, [m["times"] for m in members], [m["velocity"] for m in members], cfg.t0)
    for i, m in enumerate(members):
        write_csv(out / f"delta_{i}_timeseries.csv", diag.COLUMNS, m["rows"])
        s = dict(m["summary"])
        s["delta"] = m["delta"]
        write_json(out / f"delta_{i}_summary.json", s)
    rows = [[deltas[i], deltas[i + 1], v] for i, v in enumerate(table)]
    write_csv(out / "cauchy.csv", ["delta_a", "delta_b", "l2_diff"], rows)
    finite = [v for v in table if math.isfinite(v)]
    decreasing = len(finite) == len(table) and all(b < a for a, b in zip(table[:-1], table[1:]))
    failures = [{"delta": m["delta"], **m["failure"]} for m in members if m["failure"]]
    write_json(out / "sweep.json", {"deltas": deltas, "t0": cfg.t0, "differences": table,
                                    "strictly_decreasing": decreasing, "failures": failures})
    for r in rows:
        print(f"delta {r[0]:g} -> {r[1]:g}: {r[2]:.6e}")
    print("cauchy column strictly decreasing" if decreasing else "cauchy column NOT strictly decreasing")
    return EXIT_RUNTIME if failures else EXIT_OK


# verification and reporting


def cmd_verify(args) -> int:
    names = args.checks.split(",") if args.checks else None
    if names:
        unknown = [n for n in names if n not in vfy.CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks {unknown}; choose from {sorted(vfy.CHECKS)}")
    results = vfy.run_suite(names)
    out_dir = args.out or os.environ.get("OUTPUT_DIR")
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        write_json(Path(out_dir) / "verify.json", {"results": results})
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['check']}")
    ok = all(r["passed"] for r in results)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_report(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if args.config:
        cfg = load_config(args)
        src = output_dir(args, cfg)
    else:
        src = Path(args.out or os.environ.get("OUTPUT_DIR") or "out")
    path = src / "timeseries.csv"
    if not path.exists():
        raise ConfigError(f"no time series at {path}; run the scenario first")
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not body:
        raise ConfigError(f"{path} has no samples")
    data = {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}
    t = data["t"]
    plt.rcParams["svg.hashsalt"] = "anisoflow"
    panels = {
        "functionals.svg": (("E", "A1", "A2", "B"), False),
        "residuals.svg": (("resA1", "resA2", "resFlux", "resRenorm"), True),
        "monitor.svg": (("bootstrap_ratio", "meanU_slack"), False),
        "density.svg": (("rho_min", "rho_max"), False),
    }
    for fname, (cols, logy) in panels.items():
        fig, ax = plt.subplots(figsize=(6, 4))
        for c in cols:
            y = np.abs(data[c]) if logy else data[c]
            ax.plot(t, y, label=c)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.legend()
        fig.tight_layout()
        fig.savefig(src / fname, format="svg", metadata={"Date": None})
        plt.close(fig)
        print(f"wrote {src / fname}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="anisoflow", description="Anisotropic compressible flow simulator and diagnostics")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="INI run configuration")
        sp.add_argument("--out", help="output directory (overrides OUTPUT_DIR and the config)")

    sp = sub.add_parser("check", help="verify the tensor hypotheses")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("run", help="integrate one scenario and write diagnostics")
    common(sp)
    sp.add_argument("--force", action="store_true", help="run even if hypotheses fail")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep-delta", help="run the delta list and tabulate Cauchy differences")
    common(sp)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep_delta)

    sp = sub.add_parser("verify", help="run the oracle and property suite")
    common(sp, config_required=False)
    sp.add_argument("--checks", help="comma-separated subset of checks")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("report", help="render SVG plots of a run's time series")
    common(sp, config_required=False)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except HypothesisError as exc:
        print(f"hypothesis error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except AnisoflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
