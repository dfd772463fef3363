"""``mps`` command line: solve | verify | liouville | sweep.

Exit codes: 0 success, 2 non-convergence (or blow-up), 1 input error.
Every failure prints a one-line JSON diagnostic on stderr and, when the
output directory is writable, also stores it as ``diagnostic.json``.
Every run writes ``manifest.json`` with the fully resolved config.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np

from .config import COMMANDS, Config, ConfigError, build_forcing, load_config, random_state_coeffs
from .io import SnapshotError, read_snapshot, write_report, write_snapshot, _jsonable
from .operators import CutoffSpec, poisson_residual, pressure_from_velocity
from .solver import (
    SolverParams,
    State,
    apriori_bound,
    apriori_left,
    continuation,
    homotopy_scan,
    picard_solve,
    state_e_norm,
)
from .spectral import Grid, ScalarField, SpectralVectorField, sobolev_norm
from .verification import (
    LIOUVILLE_TERMS,
    corollary_bound,
    gaussian_fields,
    decay_scan,
    energy_ledger,
    liouville_ledger,
    regularity_ladder,
    residuals,
    trilinear_nullity,
)

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2


class RunFailure(Exception):
    def __init__(self, code: int, kind: str, message: str, details: dict | None = None):
        super().__init__(message)
        self.code, self.kind, self.details = code, kind, details or {}


def _params(cfg: Config, grid: Grid) -> SolverParams:
    f, g = build_forcing(cfg, grid)
    p = cfg.params
    try:
        return SolverParams(
            epsilon=p.epsilon, R_cut=p.R_cut, f=f, g=g, kappa=p.kappa, lam=p.lam, damping=p.damping,
            max_iters=p.max_iters, tol=p.tol, scheme=p.scheme, inner_rtol=p.inner_rtol,
        )
    except ValueError as exc:
        raise ConfigError("forcing" if "divergence" in str(exc) else "params", str(exc)) from exc


def _snapshot_state(path: str, grid: Grid) -> tuple[State, ScalarField | None, dict]:
    snap = read_snapshot(path)
    if (snap.n, snap.L) != (grid.n, grid.L):
        raise ConfigError("run.snapshot", f"snapshot grid (n={snap.n}, L={snap.L}) differs from config grid")
    for name in ("u", "omega"):
        if name not in snap.fields:
            raise ConfigError("run.snapshot", f"snapshot has no field {name!r}")
    state = State(SpectralVectorField(grid, snap.fields["u"]), SpectralVectorField(grid, snap.fields["omega"]))
    p = ScalarField(grid, snap.fields["p"]) if "p" in snap.fields else None
    return state, p, snap.fields


def _initial_state(cfg: Config, grid: Grid) -> State:
    r = cfg.run
    if r.init == "zero":
        return State.zeros(grid)
    if r.init == "random":
        u, w = random_state_coeffs(grid, r.seed, r.init_norm)
        return State(SpectralVectorField(grid, u), SpectralVectorField(grid, w))
    return _snapshot_state(r.snapshot, grid)[0]


# --------------------------------------------------------------------------
# commands


def cmd_solve(cfg: Config, out: Path) -> tuple[int, dict]:
    grid = cfg.make_grid()
    params = _params(cfg, grid)
    state, trace = picard_solve(params, _initial_state(cfg, grid), diagnostics=cfg.run.diagnostics)
    p = pressure_from_velocity(state.u)
    write_snapshot(
        out / "solution.mps", grid,
        {"u": state.u.coeffs, "omega": state.omega.coeffs, "p": p.coeffs, "f": params.f.coeffs, "g": params.g.coeffs},
    )
    write_report(out / "trace.csv", trace)
    bound = apriori_bound(params)
    summary = {
        "converged": trace.converged,
        "reason": trace.reason,
        "iterations": trace.iterations,
        "fixed_point_residual": trace.fixed_point_residual[-1] if trace.fixed_point_residual else None,
        "H1_u": sobolev_norm(state.u, 1),
        "H1_w": sobolev_norm(state.omega, 1),
        "E_norm": state_e_norm(state, params.epsilon),
        "apriori_left": apriori_left(state, params.epsilon),
        "apriori_bound": bound,
        "f_Hm1": sobolev_norm(params.f, -1),
        "f_Hm2": sobolev_norm(params.f, -2),
        "g_Hm2": sobolev_norm(params.g, -2),
        "poisson_residual": poisson_residual(state.u, p),
    }
    write_report(out / "summary.json", summary)
    if not trace.converged:
        raise RunFailure(EXIT_NONCONVERGED, "non_convergence", trace.reason, summary)
    return EXIT_OK, summary


def cmd_verify(cfg: Config, out: Path) -> tuple[int, dict]:
    grid = cfg.make_grid()
    state, p, fields = _snapshot_state(cfg.run.snapshot, grid)
    if "f" in fields or "g" in fields:
        zero = np.zeros((3, *grid.shape), complex)
        f = SpectralVectorField(grid, fields.get("f", zero))
        g = SpectralVectorField(grid, fields.get("g", zero))
        pp = cfg.params
        params = SolverParams(pp.epsilon, pp.R_cut, f, g, kappa=pp.kappa, lam=pp.lam, damping=pp.damping,
                              max_iters=pp.max_iters, tol=pp.tol, scheme=pp.scheme, inner_rtol=pp.inner_rtol)
    else:
        params = _params(cfg, grid)
    if p is None:
        p = pressure_from_velocity(state.u)
    mol = residuals(state, p, params, "mollified")
    orig = residuals(state, p, params, "original")
    ledger = energy_ledger(state, params, params.lam)
    null_u, null_w = trilinear_nullity(state.u, state.omega, CutoffSpec(params.R_cut))
    ladder = regularity_ladder(state.u, state.omega, params.kappa)
    value, bound = corollary_bound(ledger, params)
    report = {
        "residuals_mollified": {"r_mom": mol.r_mom, "r_mic": mol.r_mic},
        "residuals_original": {"r_mom": orig.r_mom, "r_mic": orig.r_mic},
        "energy_ledger": ledger.as_dict(),
        "trilinear_nullity": {"advection_u": null_u, "advection_omega": null_w},
        "poisson_residual": poisson_residual(state.u, p),
        "corollary": {"theta_omega_L2_sq": value, "bound": bound},
        "regularity_ladder": {
            "rows": ladder.rows,
            "interpolation_lhs": ladder.interpolation_lhs,
            "interpolation_rhs": ladder.interpolation_rhs,
            "div_identity_residual": ladder.div_identity_residual,
        },
        "apriori": {"left": apriori_left(state, params.epsilon), "bound": apriori_bound(params)},
    }
    write_report(out / "verify.json", report)
    write_report(out / "energy_ledger.csv", (("term_name", "value"), list(ledger.terms.items())))
    return EXIT_OK, {"energy_gap": ledger.gap, "r_mom": mol.r_mom, "r_mic": mol.r_mic}


def cmd_liouville(cfg: Config, out: Path) -> tuple[int, dict]:
    grid = cfg.make_grid()
    lv = cfg.liouville
    if lv.source == "gaussian":
        u, w, p = gaussian_fields(grid, lv.width)
    else:
        state, p, _ = _snapshot_state(cfg.run.snapshot, grid)
        u, w = state.u, state.omega
        if p is None:
            p = pressure_from_velocity(u)
    reports = liouville_ledger(u, w, p, lv.R_list, lv.q, kappa=cfg.params.kappa, refine=lv.refine)
    write_report(out / "liouville_ledger.csv", reports)
    write_report(out / "liouville_ledger.json", [r.as_dict() for r in reports])
    rows = []
    for name, fld, norms in (
        ("u", u, [(6.0, "annulus"), (lv.q, "annulus")]),
        ("omega", w, [(6.0, "annulus"), (2.0, "annulus")]),
        ("p", p, [(lv.q / 2.0, "annulus")]),
    ):
        for row in decay_scan(fld, lv.R_list, norms, refine=lv.refine):
            rows.append((name, row.R, row.p, row.region, row.value))
    write_report(out / "decay.csv", (("field", "R", "p", "region", "value"), rows))
    return EXIT_OK, {"R_list": lv.R_list, "terms": list(LIOUVILLE_TERMS)}


def cmd_sweep(cfg: Config, out: Path) -> tuple[int, dict]:
    grid = cfg.make_grid()
    params = _params(cfg, grid)
    sw = cfg.sweep
    cells = continuation(params, sw.epsilons, sw.radii)
    write_report(
        out / "continuation.csv",
        (
            ("R", "epsilon", "converged", "iterations", "H1", "H1_diff_prev", "energy_gap"),
            [(c.R_cut, c.epsilon, c.converged, c.iterations, c.H1, c.H1_diff_prev, c.energy_gap) for c in cells],
        ),
    )
    scan = homotopy_scan(params, sw.lambdas)
    write_report(
        out / "homotopy.csv",
        (
            ("lambda", "converged", "H1_u", "H1_w", "E_norm", "apriori_ratio", "flagged"),
            [(h.lam, h.converged, h.H1_u, h.H1_w, h.E_norm, h.apriori_ratio, h.flagged) for h in scan],
        ),
    )
    failed = [f"continuation R={c.R_cut} eps={c.epsilon}" for c in cells if not c.converged]
    failed += [f"homotopy lambda={h.lam}" for h in scan if not h.converged]
    summary = {"cells": len(cells), "lambdas": len(scan), "non_converged": failed}
    if failed:
        raise RunFailure(EXIT_NONCONVERGED, "non_convergence", f"{len(failed)} sweep cells did not converge", summary)
    return EXIT_OK, summary


HANDLERS = {"solve": cmd_solve, "verify": cmd_verify, "liouville": cmd_liouville, "sweep": cmd_sweep}


# --------------------------------------------------------------------------
# entry point


def write_manifest(out: Path, cfg: Config | None, argv: list[str], status: dict) -> None:
    manifest = {
        "package": "micropolar",
        "argv": argv,
        "config": cfg.to_dict() if cfg is not None else None,
        "status": status,
        "environment": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "MPS_THREADS": os.environ.get("MPS_THREADS", "0"),
        },
    }
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2) + "\n", encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mps", description="Regularized stationary micropolar solver and audits.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON config file")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="K=V",
                    help="override a config key, e.g. --set params.epsilon=0.25 (repeatable)")
    ap.add_argument("--out", default=None, help="output directory (overrides run.output_dir)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _diagnostic(code: int, kind: str, message: str, details: dict | None = None) -> dict:
    return {"status": "error", "exit_code": code, "kind": kind, "message": message, "details": details or {}}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = [f"run.command={args.command}"] + list(args.overrides)
    if args.out is not None:
        overrides.append(f"run.output_dir={json.dumps(args.out)}")
    cfg = None
    out: Path | None = None
    try:
        cfg = load_config(args.config, overrides)
        out = Path(cfg.run.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        code, info = HANDLERS[cfg.run.command](cfg, out)
        status = {"status": "ok", "exit_code": code, **info}
    except RunFailure as exc:
        status = _diagnostic(exc.code, exc.kind, str(exc), exc.details)
    except (ConfigError, SnapshotError) as exc:
        status = _diagnostic(EXIT_INPUT, "input_error", str(exc))
    except (OSError, ValueError) as exc:
        status = _diagnostic(EXIT_INPUT, "input_error", f"{type(exc).__name__}: {exc}")
    code = int(status["exit_code"])
    if out is None and args.out is not None:
        out = Path(args.out)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            write_manifest(out, cfg, argv, status)
            if code != EXIT_OK:
                (out / "diagnostic.json").write_text(json.dumps(_jsonable(status), indent=2) + "\n", encoding="utf-8")
        except OSError:
            pass
    if code != EXIT_OK:
        print(json.dumps(_jsonable(status)), file=sys.stderr)
    else:
        print(json.dumps(_jsonable(status)))
    return code


if __name__ == "__main__":
    sys.exit(main())
