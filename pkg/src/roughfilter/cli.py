"""Command-line entry point.

    roughfilter <command> [--config PATH] [--seed N] [--out DIR] [--threads N]

Commands: sample, lift, rde, filter, trapezoid, zakai, calibrate-kappa,
selftest.  Every run writes a manifest (config hash, seed, versions,
output checksums) alongside its CSV outputs.  Exit codes: 0 ok, 1 config
error, 2 numerical failure.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import USING_NUMBA, set_threads
from .config import ConfigError, default_config_text, load_config


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, cfg, seed: int, outputs):
    import scipy

    versions = {"python": sys.version.split()[0], "numpy": np.__version__,
                "scipy": scipy.__version__, "roughfilter": __version__,
                "numba": None}
    if USING_NUMBA:
        import numba

        versions["numba"] = numba.__version__
    manifest = {
        "command": command,
        "config_hash": cfg.config_hash,
        "seed": seed,
        "versions": versions,
        "outputs": [{"path": p.name, "sha256": _sha256(p)} for p in outputs],
    }
    mpath = out_dir / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return mpath


def _csv_rows(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                         else v for v in row])
    return path


def cmd_sample(cfg, out: Path, seed: int):
    from .volterra import condition_report, export_samples_csv, sample_joint

    s = cfg.scenario
    samples = sample_joint(s.kernel, s.grid, s.d_noise, s.d_noise,
                           min(cfg.run["n_paths"], 64), seed)
    outputs = export_samples_csv(samples, out / "samples.csv")
    rep = condition_report(s.kernel, s.grid)
    outputs.append(_csv_rows(out / "conditions.csv",
                             ["item", "value", "status"],
                             [["rho", rep.rho, "info"],
                              ["R_rho_var", rep.r_rho_var, "pass" if np.isfinite(rep.r_rho_var) else "warn"],
                              ["holder_ratio_trend", float(rep.holder_ratios[-1] / rep.holder_ratios[0]) if len(rep.holder_ratios) else float("nan"),
                               "pass" if rep.holder_pass else "warn"],
                              ["cross_rho_var", rep.cross_rho_var, "pass" if np.isfinite(rep.cross_rho_var) else "warn"],
                              ["smoothing_ratio", rep.smoothing_exponent_ratio,
                               "pass" if rep.smoothing_pass else "warn"]]))
    print(f"sampled {len(samples)} paths; conditions "
          f"{'pass' if rep.all_pass else 'WARN'}")
    return outputs


def cmd_lift(cfg, out: Path, seed: int):
    from .lift import (chen_residual, dyadic_convergence_study, export_lift_csv,
                       lift_joint_hybrid)
    from .tensor import grouplike_residual
    from .volterra import sample_joint

    s = cfg.scenario
    (sample,) = sample_joint(s.kernel, s.fine_grid, s.d_noise, s.d_noise, 1, seed)
    lift = lift_joint_hybrid(sample, list(range(s.d_B, s.d_noise)),
                             level=s.p_level[1], inner_refine=s.inner_refine)
    outputs = [Path(export_lift_csv(lift, out / "lift.csv"))]
    chen = chen_residual(lift)
    worst_gl = max(grouplike_residual(lift.increment(i))
                   for i in range(lift.n_intervals))
    rows = dyadic_convergence_study(s.kernel, cfg.run["dims"], cfg.run["n_min"],
                                    cfg.run["n_max"], cfg.run["p"],
                                    min(cfg.run["n_paths"], 100), seed, T=s.T)
    outputs.append(_csv_rows(out / "dyadic.csv",
                             ["level", "mean_distance", "max_distance"], rows))
    decreasing = all(a[1] > b[1] for a, b in zip(rows[:-1], rows[1:]))
    print(f"chen residual {chen:.2e}; group-like residual {worst_gl:.2e}; "
          f"dyadic distances decreasing: {decreasing}")
    if chen > 1e-10 or worst_gl > 1e-9:
        raise RuntimeError("lift residuals above tolerance")
    return outputs


def cmd_rde(cfg, out: Path, seed: int):
    from .lift import lift_segmentwise
    from .rde import export_solution_csv, solve_jacobian, solve_rde_volterra
    from .volterra import panel_weights_cached, sample_joint

    s = cfg.scenario
    (sample,) = sample_joint(s.kernel, s.grid, s.d_noise, 0, 1, seed)
    lift = lift_segmentwise(sample.grid, sample.B.T, level=s.p_level[1])
    z0 = np.concatenate([s.sample_x0(seed, 1)[0], np.zeros(s.d_Y)])
    sol = solve_rde_volterra(lift, s.sigma_hat(), s.b_hat(), s.kernel, z0,
                             panel_weights=panel_weights_cached(s.kernel, sample.grid))
    jac = solve_jacobian(lift, s.sigma_hat(), sol)
    outputs = [Path(export_solution_csv(sol, out / "solution.csv", jacobian=jac))]
    # dyadic refinement study on one driver
    rows = []
    prev = None
    for k in (0, 1, 2):
        step = 2 ** (2 - k)
        sub = lift_segmentwise(sample.grid[::step], sample.B[:, ::step].T,
                               level=s.p_level[1])
        cur = solve_rde_volterra(sub, s.sigma_hat(), s.b_hat(), s.kernel, z0)
        if prev is not None:
            rows.append([k, float(np.abs(cur.trace[-1] - prev.trace[-1]).max())])
        prev = cur
    outputs.append(_csv_rows(out / "refinement.csv", ["level", "endpoint_gap"], rows))
    print(f"solved RDE; endpoint refinement gaps {[r[1] for r in rows]}")
    return outputs


def cmd_filter(cfg, out: Path, seed: int):
    from .filtering import estimates_to_csv, normalized_filter, robust_filter, simulate_truth

    s = cfg.scenario
    truth = simulate_truth(s, seed)
    unnorm = robust_filter(s, truth, cfg.run["n_mc"], seed + 1, cfg.run["t_eval"])
    normed = normalized_filter(s, truth, cfg.run["n_mc"], seed + 1, cfg.run["t_eval"])
    outputs = [Path(estimates_to_csv(list(unnorm) + list(normed), out / "filter.csv"))]
    outputs.append(_csv_rows(out / "truth.csv", ["t", "X_1", "Y_1", "W_1"],
                             [[t, truth.X[i, 0],
                               truth.Y_fine[0, i * truth.inner_refine],
                               truth.W_fine[0, i * truth.inner_refine]]
                              for i, t in enumerate(truth.grid)]))
    for e in normed:
        print(f"t={e.t:.3f}: normalized={e.value:.5f} +- {e.stderr:.5f} "
              f"(ess {e.ess:.0f}/{e.n_samples})")
    return outputs


def cmd_trapezoid(cfg, out: Path, seed: int):
    from .filtering import simulate_truth, trapezoid_check, xi_on_truth

    from .rde import ControlledSolution, compose_observation_functional

    s = cfg.scenario
    mode = "young" if s.kernel.H == 0.5 else "panel"
    defects = []
    for i in range(min(cfg.run["n_paths"], 200)):
        truth = simulate_truth(s, seed + i, under="P")
        xi, sol, lifts = xi_on_truth(s, truth)
        L = compose_observation_functional(
            s.b, ControlledSolution(grid=lifts.grid, trace=sol.trace[0],
                                    gub1=sol.gub1[0]),
            s.d_B + 2 * s.d_Y,
            [s.d_B + s.d_Y + j for j in range(s.d_Y)],
            state_cols=list(range(s.d_noise)))
        rep = trapezoid_check(L, lifts.path(0), s.kernel, s.d_B, s.d_Y,
                              correction=mode)
        defects.append(rep.defect)
    defects = np.array(defects)
    outputs = [_csv_rows(out / "trapezoid.csv", ["path", "defect"],
                         list(enumerate(defects)))]
    se = defects.std(ddof=1) / np.sqrt(len(defects))
    print(f"mean defect {defects.mean():.5f} (se {se:.5f}, correction={mode})")
    if abs(defects.mean()) > 4 * se + 1e-9:
        raise RuntimeError("trapezoid defect not centered")
    return outputs


def cmd_zakai(cfg, out: Path, seed: int):
    from .filtering import simulate_truth
    from .zakai import (compare_zakai_particle, default_x_grid, density_to_csv,
                        rough_viscosity_convergence, solve_zakai, zakai_mass)

    s = cfg.scenario
    truth = simulate_truth(s, seed)
    x = default_x_grid(s, cfg.run["m_space"])
    kappa = cfg.run["kappa"]
    zg = solve_zakai(s, truth, x, kappa)
    outputs = [Path(density_to_csv(zg, out / "density.csv",
                                   stride=max(1, len(zg.t_grid) // 32)))]
    comp = compare_zakai_particle(s, truth, cfg.run["n_mc"], x, kappa, seed + 1,
                                  t_eval=cfg.run["t_eval"])
    outputs.append(_csv_rows(out / "comparison.csv", ["t", "l1_distance"],
                             comp["table"]))
    rows = rough_viscosity_convergence(s, truth, x, kappa,
                                       refine_levels=cfg.run["refine_levels"])
    outputs.append(_csv_rows(out / "viscosity.csv",
                             ["level", "time_refine", "sup_distance"], rows))
    print(f"mass(T)={zakai_mass(zg, s.T):.5f}; particle L1={comp['l1_distance']:.4f}; "
          f"viscosity distances {[round(r[2], 6) for r in rows]}")
    return outputs


def cmd_calibrate_kappa(cfg, out: Path, seed: int):
    from .zakai import calibrate_kappa

    s = cfg.scenario
    kappa, table = calibrate_kappa(s, n_draws=cfg.run["n_draws"], seed=seed,
                                   m=cfg.run["m_space"])
    rows = [[r["draw"], r[1.0], r[0.5], r["winner"]] for r in table]
    outputs = [_csv_rows(out / "kappa.csv",
                         ["draw", "err_kappa_1", "err_kappa_half", "winner"], rows)]
    (out / "kappa.txt").write_text(f"{kappa}\n")
    outputs.append(out / "kappa.txt")
    print(f"calibrated kappa = {kappa}")
    return outputs


def cmd_selftest(cfg, out: Path, seed: int):
    """Condensed property suite across modules; exit nonzero on failure."""
    from . import selftest

    results = selftest.run_all(seed=seed)
    rows = [[name, "pass" if ok else "FAIL", detail] for name, ok, detail in results]
    outputs = [_csv_rows(out / "selftest.csv", ["check", "status", "detail"], rows)]
    for name, ok, detail in results:
        print(f"[{'pass' if ok else 'FAIL'}] {name}: {detail}")
    if not all(ok for _, ok, _ in results):
        raise RuntimeError("selftest failures")
    return outputs


COMMANDS = {
    "sample": cmd_sample,
    "lift": cmd_lift,
    "rde": cmd_rde,
    "filter": cmd_filter,
    "trapezoid": cmd_trapezoid,
    "zakai": cmd_zakai,
    "calibrate-kappa": cmd_calibrate_kappa,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="roughfilter",
        description="Nonlinear filtering for Volterra Gaussian rough-path systems")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, default=None,
                        help="experiment config (key = value sections); "
                             "defaults to the built-in benchmark")
    parser.add_argument("--seed", type=int, default=None, help="override run seed")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        env = os.environ.get("ROUGHFILTER_THREADS")
        threads = int(env) if env else None
    set_threads(threads)

    try:
        text = args.config.read_text() if args.config else default_config_text()
        cfg = load_config(text)
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    seed = args.seed if args.seed is not None else cfg.run["seed"]
    out_dir = args.out if args.out is not None else Path(cfg.run["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        outputs = COMMANDS[args.command](cfg, out_dir, seed)
        _write_manifest(out_dir, args.command, cfg, seed, [Path(p) for p in outputs])
    except Exception as exc:  # numerical failure path
        (out_dir / "diagnostics.txt").write_text(f"{type(exc).__name__}: {exc}\n")
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
