"""Scenario-driven command line front end.

Every subcommand reads one scenario file (or the built-in default), runs a
piece of the laboratory, and writes plain-text artifacts into the scenario's
output directory:

``simulate``
    one driving path, full time series (path, functionals, energy,
    breakpoint positions, slopes, velocities) as CSV;
``ensemble``
    ensemble mean/stderr of the energy on the whole time grid;
``law``
    breaking-time survival/CDF table from the quadrature law;
``slice``
    Eulerian snapshots (exact piecewise representation) of one path;
``deterministic``
    the noiseless reference solution with its defect ledger;
``verify``
    a battery of self-checks sized to the scenario, JSON report, exit
    status 0 only if every applicable check passes.

Reruns with the same scenario and seed produce byte-identical files: floats
are printed with repr-faithful precision, ensemble reductions are chunked by
fixed path index, and the worker count (``--threads``) never changes chunk
boundaries.  ``SHS_SEED`` in the environment overrides the scenario's master
seed.  Malformed scenarios exit with status 2 and a message naming the
offending key; an output collision exits with status 1 unless ``--force``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .breaking import breaking_cdf_batch
from .characteristics import (
    ContinuationMode,
    StepInitialData,
    build_field,
    sde_cross_check,
    singular_mask,
)
from .deterministic import (
    defect_ledger,
    det_breaking_times,
    det_energy,
    det_solution,
    sigma_zero_consistency,
)
from .diagnostics import (
    TestFunction,
    apriori_bounds_check,
    bessel_timechange_check,
    breaking_law_ks,
    ensemble_energies,
    expected_energy_check,
    meeting_time_check,
    weak_form_residual,
)
from .eulerian import energy_eulerian, energy_lagrangian, eulerian_slice, oleinik_report
from .paths import TimeGrid, path_seed, sample_brownian
from .scenario import DEFAULT_SCENARIO, Scenario, ScenarioError, load_scenario, parse_scenario
from .yor import YorQuadratureParams

__all__ = ["main"]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path: str, scenario: Scenario, command: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# shslab {__version__} {command}\n")
        fh.write(f"# scenario_hash={scenario.hash}\n")
        fh.write(f"# master_seed={scenario.master_seed}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare_outputs(scenario: Scenario, files: list[str], force: bool) -> list[str]:
    """Create the output directory; refuse to clobber existing artifacts."""
    out = scenario.out_dir
    os.makedirs(out, exist_ok=True)
    targets = [os.path.join(out, f) for f in ["scenario.resolved.json", *files]]
    if not force:
        hits = [t for t in targets if os.path.exists(t)]
        if hits:
            raise FileExistsError(
                f"output already exists: {hits[0]} (pass --force to overwrite)"
            )
    _write_json(targets[0], scenario.resolved())
    return targets[1:]


def _snapshot_indices(n_steps: int, n_snaps: int) -> np.ndarray:
    return np.unique(np.round(np.linspace(0, n_steps, n_snaps)).astype(int))


def _summary_path(scenario: Scenario, command: str) -> str:
    return os.path.join(scenario.out_dir, f"{command}_summary.json")


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(scenario: Scenario, threads: int, force: bool) -> int:
    files = ["series.csv"]
    if "json" in scenario.formats:
        files.append("simulate_summary.json")
    targets = _prepare_outputs(scenario, files, force)

    grid = TimeGrid(scenario.t_end, scenario.n_steps)
    path = sample_brownian(grid, path_seed(scenario.master_seed, 0))
    fld = build_field(scenario.sigma, scenario.initial, scenario.mode, path)
    times = grid.times()
    n_nodes = scenario.initial.breakpoints.size

    header = ["t", "w", "z", "a", "energy"]
    header += [f"x{i}" for i in range(n_nodes)]
    header += [f"u{i}" for i in range(n_nodes)]
    header += [f"q{i}" for i in range(n_nodes - 1)]

    rows = []
    for k, t in enumerate(times):
        sl = eulerian_slice(fld, float(t))
        rows.append(
            [t, path.w[k], fld.expf.z[k], fld.expf.a[k], energy_lagrangian(fld, float(t))]
            + list(sl.x_nodes)
            + list(sl.u_nodes)
            + list(sl.q_boxes)
        )
    _write_csv(targets[0], scenario, "simulate", header, rows)

    if "json" in scenario.formats:
        _write_json(
            targets[1],
            {
                "scenario_hash": scenario.hash,
                "path_seed": path_seed(scenario.master_seed, 0),
                "t_star": [None if not math.isfinite(t) else t for t in fld.t_star],
                "final_energy": energy_lagrangian(fld, scenario.t_end),
            },
        )
    return 0


def _cmd_ensemble(scenario: Scenario, threads: int, force: bool) -> int:
    files = ["ensemble.csv"]
    if "json" in scenario.formats:
        files.append("ensemble_summary.json")
    targets = _prepare_outputs(scenario, files, force)

    grid = TimeGrid(scenario.t_end, scenario.n_steps)
    ts = grid.times()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            energies = ensemble_energies(
                scenario.sigma.slope, scenario.initial, scenario.mode,
                ts, grid.dt, scenario.n_paths, scenario.master_seed, map_fn=pool.map,
            )
    else:
        energies = ensemble_energies(
            scenario.sigma.slope, scenario.initial, scenario.mode,
            ts, grid.dt, scenario.n_paths, scenario.master_seed,
        )
    means = np.mean(energies, axis=0)
    if scenario.n_paths > 1:
        stderrs = np.std(energies, axis=0, ddof=1) / math.sqrt(scenario.n_paths)
    else:
        stderrs = np.zeros_like(means)

    rows = [[t, m, s] for t, m, s in zip(ts, means, stderrs)]
    _write_csv(targets[0], scenario, "ensemble", ["t", "energy_mean", "energy_stderr"], rows)

    if "json" in scenario.formats:
        _write_json(
            targets[1],
            {
                "scenario_hash": scenario.hash,
                "n_paths": scenario.n_paths,
                "final": {"t": scenario.t_end, "mean": means[-1], "stderr": stderrs[-1]},
            },
        )
    return 0


def _cmd_law(scenario: Scenario, threads: int, force: bool) -> int:
    files = ["law.csv"]
    if "json" in scenario.formats:
        files.append("law_summary.json")
    targets = _prepare_outputs(scenario, files, force)

    q0x = float(np.min(scenario.initial.values))
    grid = TimeGrid(scenario.t_end, scenario.n_steps)
    ks = _snapshot_indices(scenario.n_steps, 33)
    ts = ks * grid.dt
    slope = scenario.sigma.slope
    if q0x < 0.0 and slope != 0.0:
        # the quadrature law has a validity floor in its rescaled time
        t_min = 4.0 * YorQuadratureParams.default().min_t / slope**2
        ts = ts[(ts == 0.0) | (ts >= t_min)]
    surv = breaking_cdf_batch(ts, q0x, slope)

    rows = [[t, s, 1.0 - s] for t, s in zip(ts, surv)]
    _write_csv(targets[0], scenario, "law", ["t", "survival", "cdf"], rows)

    if "json" in scenario.formats:
        _write_json(
            targets[1],
            {
                "scenario_hash": scenario.hash,
                "q0x": q0x,
                "sigma_slope": slope,
                "cdf_at_t_end": 1.0 - float(surv[-1]),
            },
        )
    return 0


def _slice_rows(sl) -> list[list]:
    rows = []
    for b in range(sl.q_boxes.size):
        rows.append(
            [
                sl.t,
                b,
                sl.x_nodes[b],
                sl.x_nodes[b + 1],
                sl.q_boxes[b],
                sl.u_nodes[b],
                sl.u_nodes[b + 1],
            ]
        )
    return rows


_SLICE_HEADER = ["t", "box", "x_lo", "x_hi", "q", "u_lo", "u_hi"]


def _cmd_slice(scenario: Scenario, threads: int, force: bool) -> int:
    files = ["slices.csv"]
    if "json" in scenario.formats:
        files.append("slice_summary.json")
    targets = _prepare_outputs(scenario, files, force)

    grid = TimeGrid(scenario.t_end, scenario.n_steps)
    path = sample_brownian(grid, path_seed(scenario.master_seed, 0))
    fld = build_field(scenario.sigma, scenario.initial, scenario.mode, path)
    times = _snapshot_indices(scenario.n_steps, 9) * grid.dt

    rows = []
    for t in times:
        rows.extend(_slice_rows(eulerian_slice(fld, float(t))))
    _write_csv(targets[0], scenario, "slice", _SLICE_HEADER, rows)

    if "json" in scenario.formats:
        _write_json(
            targets[1],
            {
                "scenario_hash": scenario.hash,
                "times": times.tolist(),
                "n_boxes": int(scenario.initial.n_boxes),
            },
        )
    return 0


def _cmd_deterministic(scenario: Scenario, threads: int, force: bool) -> int:
    files = ["deterministic.csv", "det_energy.csv"]
    if "json" in scenario.formats:
        files.append("deterministic_summary.json")
    targets = _prepare_outputs(scenario, files, force)

    grid = TimeGrid(scenario.t_end, scenario.n_steps)
    times = _snapshot_indices(scenario.n_steps, 9) * grid.dt

    rows = []
    for t in times:
        rows.extend(_slice_rows(det_solution(scenario.initial, float(t))))
    _write_csv(targets[0], scenario, "deterministic", _SLICE_HEADER, rows)

    # dissipated energy plus the defect atoms adds back up to ||q0||^2
    erows = []
    for t in grid.times():
        e = det_energy(scenario.initial, float(t))
        d = defect_ledger(scenario.initial, float(t)).total
        erows.append([t, e, d, e + d])
    _write_csv(
        targets[1], scenario, "deterministic",
        ["t", "energy", "defect_total", "total"], erows,
    )

    if "json" in scenario.formats:
        tb = det_breaking_times(scenario.initial)
        _write_json(
            targets[2],
            {
                "scenario_hash": scenario.hash,
                "breaking_times": [None if not math.isfinite(t) else t for t in tb],
                "initial_energy": scenario.initial.norm_l2_sq,
                "final_energy": det_energy(scenario.initial, scenario.t_end),
            },
        )
    return 0


# ---------------------------------------------------------------------------
# verify


def _check(name: str, statistic: float, tolerance: float, ok: bool, **extra) -> dict:
    entry = {
        "check": name,
        "statistic": float(statistic),
        "tolerance": float(tolerance),
        "verdict": "pass" if ok else "fail",
    }
    entry.update(extra)
    return entry


def _skip(name: str, reason: str) -> dict:
    return {"check": name, "statistic": None, "tolerance": None,
            "verdict": "skip", "reason": reason}


def _verify_checks(scenario: Scenario) -> list[dict]:
    sig = scenario.sigma
    initial = scenario.initial
    t_end = scenario.t_end
    grid = TimeGrid(t_end, scenario.n_steps)
    seed = scenario.master_seed
    has_negative = bool(np.any(initial.values < 0.0))
    checks = []

    # 1. the noiseless reference and the sigma -> 0 limit of the machinery
    dev = sigma_zero_consistency(initial, min(t_end, 1.0))
    checks.append(_check("deterministic_reference", dev, 1e-9, dev <= 1e-9))

    # 2. pathwise energy identity: int Q^2 dx = Z(t) ||q0||^2, conservative
    n_id = min(scenario.n_paths, 50)
    worst = 0.0
    n0 = initial.norm_l2_sq
    for i in range(n_id):
        fld = build_field(
            sig, initial, ContinuationMode.CONSERVATIVE,
            sample_brownian(grid, path_seed(seed, i)),
        )
        for k in (scenario.n_steps // 2, scenario.n_steps):
            t = k * grid.dt
            if singular_mask(fld, t).any():
                continue
            gap = abs(energy_eulerian(fld, t) - fld.expf.z[k] * n0) / n0
            worst = max(worst, gap)
    checks.append(_check("pathwise_energy_identity", worst, 1e-10,
                         worst <= 1e-10, n_paths=n_id))

    # 3. mean energy law E = ||q0||^2 exp(a^2 t / 2); test at a horizon where
    # the lognormal tail still lets a z-test make sense
    t_mean = min(t_end, 1.0 / sig.slope**2) if sig.slope != 0.0 else t_end
    rep = expected_energy_check(sig.slope, initial, [t_mean], scenario.n_paths,
                                seed, dt=grid.dt)
    z = abs(rep["per_time"][0]["z"])
    checks.append(_check("mean_energy_law", z, 3.0, z <= 3.0,
                         t=t_mean, n_paths=scenario.n_paths))

    # 4. breaking-time law vs quadrature (censored KS)
    if has_negative and sig.slope != 0.0:
        ks = breaking_law_ks(float(np.min(initial.values)), sig.slope,
                             scenario.n_paths, seed)
        checks.append(_check("breaking_law_ks", ks["statistic"], ks["critical"],
                             ks["ok"], n_in_window=ks["n_in_window"]))
    else:
        checks.append(_skip("breaking_law_ks",
                            "needs a negative slope and nonzero noise"))

    # 5. detected meeting time vs closed-form breaking time
    if has_negative:
        dt_fine = 5e-4
        mt = meeting_time_check(sig.slope, initial, t_end,
                                int(round(t_end / dt_fine)),
                                min(scenario.n_paths, 200), seed, tol=1e-3)
        checks.append(_check("meeting_vs_breaking", mt["max_gap"], mt["tol"],
                             mt["ok"], n_checked=mt["n_checked"]))
    else:
        checks.append(_skip("meeting_vs_breaking", "no box ever breaks"))

    # 6. weak-form residual shrinks under refinement
    bp = initial.breakpoints
    phi = TestFunction(0.5 * (bp[0] + bp[-1]), max(2.0, 2.0 * (bp[-1] - bp[0])))
    t_weak = min(t_end, 3.0)
    levels = [200, 400, 800]
    meds = []
    for n in levels:
        g = TimeGrid(t_weak, n)
        res = [
            abs(weak_form_residual(
                build_field(sig, initial, scenario.mode,
                            sample_brownian(g, path_seed(seed, i))),
                phi, t_weak).residual)
            for i in range(30)
        ]
        meds.append(float(np.median(res)))
    rate = float(np.polyfit(np.log([t_weak / n for n in levels]), np.log(meds), 1)[0])
    checks.append(_check("weak_form_rate", rate, 0.4, rate >= 0.4,
                         medians=meds))

    # 7. one-sided slope bounds (a dissipative-solution property)
    worst_ex = -math.inf
    for i in range(min(scenario.n_paths, 100)):
        fld = build_field(sig, initial, ContinuationMode.DISSIPATIVE,
                          sample_brownian(grid, path_seed(seed, i)))
        for k in _snapshot_indices(scenario.n_steps, 9)[1:]:
            t = float(k * grid.dt)
            rep = oleinik_report(fld, t)
            mask = ~np.isnan(rep["q"])
            if mask.any():
                ex = float(np.max(rep["q"][mask] - rep["sharp"][mask]))
                worst_ex = max(worst_ex, ex)
    checks.append(_check("oleinik_bound", worst_ex, 1e-9, worst_ex <= 1e-9))

    # 8. Bessel-clock fingerprint of the noise
    if sig.slope != 0.0:
        g = TimeGrid(1.0, 10_000)
        mism = [
            bessel_timechange_check(
                sample_brownian(g, path_seed(seed, i)), sig.slope
            )["qv_rel_mismatch"]
            for i in range(min(scenario.n_paths, 50))
        ]
        med = float(np.median(mism))
        checks.append(_check("bessel_clock", med, 0.05, med <= 0.05))
    else:
        checks.append(_skip("bessel_clock", "degenerate at zero noise slope"))

    # 9. Heun integration converges to the closed form at first order; run
    # on the non-breaking mirror of the data so no path can blow up inside
    # the comparison horizon
    if sig.slope != 0.0:
        mirror = StepInitialData(initial.breakpoints, np.abs(initial.values))
        order = sde_cross_check(sig, mirror, min(t_end, 1.0), [50, 100, 200],
                                seed, n_paths=24)["order"]
        ok = 0.7 <= order <= 1.3
        checks.append(_check("heun_order", order, 1.3, ok, lower=0.7))
    else:
        checks.append(_skip("heun_order", "exact without multiplicative noise"))

    # 10. a priori space-time norm is refinement-stable at alpha = 1/2
    ap = apriori_bounds_check(sig.slope, initial, scenario.mode, 0.5,
                              t_end, scenario.n_steps,
                              min(scenario.n_paths, 60), seed)
    gap = ap["refinement_rel_gap"]
    checks.append(_check("apriori_stability", gap, 0.05, gap <= 0.05,
                         l2_sup=ap["l2_sup"]))
    return checks


def _cmd_verify(scenario: Scenario, threads: int, force: bool) -> int:
    targets = _prepare_outputs(scenario, ["verify.json"], force)
    checks = _verify_checks(scenario)
    ok = all(c["verdict"] != "fail" for c in checks)
    _write_json(
        targets[0],
        {"scenario_hash": scenario.hash, "ok": ok, "checks": checks},
    )
    for c in checks:
        if c["verdict"] == "skip":
            print(f"[skip] {c['check']}: {c['reason']}")
        else:
            tag = " ok " if c["verdict"] == "pass" else "FAIL"
            print(f"[{tag}] {c['check']}: statistic={c['statistic']:.6g} "
                  f"tolerance={c['tolerance']:.6g}")
    print(f"verify: {'all checks passed' if ok else 'CHECKS FAILED'} "
          f"(report: {targets[0]})")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# entry point

_COMMANDS = {
    "simulate": _cmd_simulate,
    "ensemble": _cmd_ensemble,
    "law": _cmd_law,
    "slice": _cmd_slice,
    "deterministic": _cmd_deterministic,
    "verify": _cmd_verify,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shslab",
        description="Numerical laboratory for the stochastic Hunter-Saxton "
                    "equation with linear transport noise.",
    )
    parser.add_argument("--version", action="version", version=f"shslab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "simulate": "one driving path, full CSV time series",
        "ensemble": "ensemble energy statistics over the time grid",
        "law": "breaking-time survival/CDF table from the quadrature law",
        "slice": "Eulerian snapshots of one path",
        "deterministic": "noiseless reference solution and defect ledger",
        "verify": "scenario-sized self-check battery with JSON report",
    }
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--scenario", metavar="PATH",
                       help="scenario JSON file (default: built-in scenario)")
        p.add_argument("--out", metavar="DIR",
                       help="override the scenario's output directory")
        p.add_argument("--threads", type=int, default=1, metavar="N",
                       help="worker threads for ensemble reductions "
                            "(results do not depend on N)")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing output files")
        p.set_defaults(fn=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.scenario is not None:
            scenario = load_scenario(args.scenario)
        else:
            scenario = parse_scenario(DEFAULT_SCENARIO)
        if "SHS_SEED" in os.environ:
            raw = os.environ["SHS_SEED"]
            try:
                seed = int(raw)
            except ValueError:
                raise ScenarioError(
                    f"ensemble.master_seed: SHS_SEED must be an integer, got {raw!r}"
                ) from None
            if seed < 0:
                raise ScenarioError(
                    f"ensemble.master_seed: SHS_SEED must be nonnegative, got {seed}"
                )
            scenario = dataclasses.replace(scenario, master_seed=seed)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        scenario = dataclasses.replace(scenario, out_dir=args.out)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.fn(scenario, args.threads, args.force)
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
