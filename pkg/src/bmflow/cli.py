"""Command-line entry point: ``bmflow <command> [options]``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from .config import ConfigError, RunConfig, parse_config, with_overrides
from .partition import build_quadrature

log = logging.getLogger("bmflow")


def _write_ndjson(path, lines):
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line + "\n")


# ------------------------------------------------------------------ modes

def run_potential_eval(cfg: RunConfig, out: Path) -> int:
    pt = cfg.potential
    quad = build_quadrature(pt.quad_polar, pt.quad_azimuthal)
    header, rows = an.potential_table(pt.grid_points, pt.margin, quad, pt.tol)
    path = out / "potential_eval.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) for x in r])
    log.info("wrote %d rows to %s", len(rows), path)
    return 0


def run_potential_verify(cfg: RunConfig, out: Path) -> int:
    pt = cfg.potential
    quad = build_quadrature(pt.quad_polar, pt.quad_azimuthal)
    reports = an.potential_oracle_suite(pt.verify_samples, cfg.seed, pt.margin, quad, pt.tol)
    _write_ndjson(out / "potential_verify.ndjson", [r.to_json() for r in reports])
    for r in reports:
        log.info("%s: worst %.3e (tolerance %.1e) %s", r.check_name, r.worst_value,
                 r.tolerance, "pass" if r.passed else "FAIL")
    return 0 if all(r.passed for r in reports) else 1


def run_analysis(cfg: RunConfig, out: Path, checks=None) -> int:
    a = cfg.analysis
    checks = checks or a.checks
    lines, ok = [], True
    for name in checks:
        if name in ("ftest1", "concavity"):
            for rep in an.ftest1_sweep(a.margins, a.samples, cfg.seed):
                if name == "concavity":
                    rep = an.check_h_concavity(rep.worst_value / 2.0, a.samples,
                                               rep.extra["margin"], cfg.seed)
                lines.append(rep.to_json())
                ok &= rep.passed
        elif name == "laplace":
            rec = an.check_laplace_coefficients(np.asarray(a.gamma))
            rng = np.random.default_rng(cfg.seed)
            plateaus = []
            for g in an.random_directions(rng, 10):
                tab = an.asymptotic_Iij(g, [2.0**j for j in range(11)])
                bounded, _ = an.bounded_by_plateau(tab)
                plateaus.append(dict(gamma=g.tolist(), bounded=bounded,
                                     final_norm=float(np.linalg.norm(tab[-1]))))
            rec["plateaus"] = plateaus
            rec["passed"] = bool(rec["passed"] and all(p["bounded"] for p in plateaus))
            lines.append(json.dumps(rec, sort_keys=True))
            ok &= rec["passed"]
        elif name == "case2":
            for k in a.case2_k:
                vals = an.case2_f_alpha(a.case2_alphas, k)
                major = [an.case2_majorant(x, k) for x in a.case2_alphas]
                passed = all(v <= m for v, m, x in zip(vals, major, a.case2_alphas) if x >= 1.0)
                bounded, _ = an.bounded_by_plateau(np.array(vals))
                rec = dict(check_name="case2", k=k, alpha=list(a.case2_alphas), f=vals,
                           majorant=major, passed=bool(passed and bounded))
                lines.append(json.dumps(rec, sort_keys=True))
                ok &= rec["passed"]
    _write_ndjson(out / "analysis.ndjson", lines)
    for line in lines:
        rec = json.loads(line)
        log.info("%s: %s", rec["check_name"], "pass" if rec["passed"] else "FAIL")
    return 0 if ok else 1


def run_simulate(cfg: RunConfig, out: Path) -> int:
    from .sim.checkpoint import save_checkpoint
    from .sim.diagnostics import entropy_local_audit, random_bumps
    from .sim.runner import run_simulation

    s = cfg.simulation
    digest = cfg.model.digest()
    diag_path = out / "diagnostics.ndjson"
    fh = open(diag_path, "w")
    failures = []

    def on_record(rec):
        fh.write(rec.to_json() + "\n")
        fh.flush()

    def on_step(state, nstep):
        if s.checkpoint_every and nstep % s.checkpoint_every == 0:
            save_checkpoint(out / f"checkpoint_{nstep:06d}.bmqt", state, digest)

    common = dict(seed=cfg.seed, init=cfg.initial, quad_orders=(s.quad_polar, s.quad_azimuthal),
                  cadence=s.cadence, keep_history=cfg.singular_flux)
    try:
        res = run_simulation(cfg.model, s.grid_size, s.dt, s.t_end, on_record=on_record,
                             on_step=on_step, **common)
    finally:
        fh.close()
    save_checkpoint(out / "checkpoint_final.bmqt", res.state, digest)

    recs = res.records
    if max(r.energy_residual for r in recs) >= s.energy_tol:
        failures.append("energy drift")
    if max(r.entropy_balance_lhs for r in recs) > s.entropy_tol:
        failures.append("integrated entropy balance")
    if min(min(r.D_visc, r.D_H, r.D_heat) for r in recs) < 0:
        failures.append("negative dissipation")
    if max(r.div_u for r in recs) > 1e-10:
        failures.append("incompressibility")
    if max(r.mat_residual for r in recs) > 1e-12:
        failures.append("identity (mat)")

    summary = dict(steps=res.steps, final_time=res.state.time)
    if cfg.singular_flux:
        from .sim.spectral import Grid
        grid = Grid(s.grid_size)
        bumps = random_bumps(np.random.default_rng(cfg.seed), s.audit_bumps, s.t_end)
        fine = [entropy_local_audit(res.history, cfg.model, b, grid) for b in bumps]
        summary["local_audit"] = fine
        if s.audit_refinement:
            coarse_run = run_simulation(cfg.model, s.grid_size, 2 * s.dt, s.t_end, **common)
            coarse = [entropy_local_audit(coarse_run.history, cfg.model, b, grid) for b in bumps]
            tols = [abs(c - f) for c, f in zip(coarse, fine)]
            summary["local_audit_tolerance"] = tols
            if any(f > t for f, t in zip(fine, tols)):
                failures.append("local entropy audit")
    summary["failures"] = failures
    summary["passed"] = not failures
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    for f in failures:
        log.error("audit failed: %s", f)
    return 0 if not failures else 1


def run(cfg: RunConfig, checks=None) -> int:
    """Dispatch on ``cfg.mode``; returns the process exit status."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.mode == "potential-eval":
        return run_potential_eval(cfg, out)
    if cfg.mode == "potential-verify":
        return run_potential_verify(cfg, out)
    if cfg.mode == "analysis":
        return run_analysis(cfg, out, checks)
    return run_simulate(cfg, out)


# ------------------------------------------------------------------ parser

ANALYSIS_CHECKS = {"ftest1": "ftest1", "concavity": "concavity", "laplace": "laplace",
                   "case2": "case2"}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML configuration file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--singular-flux", action="store_true",
                        help="use the heat flux with the theta^-2 term")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bmflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    pot = sub.add_parser("potential", help="evaluate or verify the potential")
    pot_sub = pot.add_subparsers(dest="action", required=True)
    pot_sub.add_parser("eval", parents=[common], help="tabulate f, mu and the Hessian")
    pot_sub.add_parser("verify", parents=[common], help="run the oracle suite")
    ana = sub.add_parser("analysis", help="numerical certificates")
    ana_sub = ana.add_subparsers(dest="action", required=True)
    for name in ANALYSIS_CHECKS:
        ana_sub.add_parser(name, parents=[common])
    sub.add_parser("simulate", parents=[common], help="run the flow solver")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = parse_config(args.config.read_text()) if args.config else RunConfig()
        if args.command == "potential":
            mode = "potential-eval" if args.action == "eval" else "potential-verify"
        else:
            mode = args.command
        cfg = with_overrides(cfg, mode=mode, seed=args.seed, out_dir=args.out,
                             singular_flux=args.singular_flux)
        checks = [ANALYSIS_CHECKS[args.action]] if args.command == "analysis" else None
        return run(cfg, checks)
    except (ConfigError, OSError) as exc:
        print(f"bmflow: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"bmflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
