"""Command-line entry point: ``rcasim <subcommand> --scenario FILE --out FILE``."""

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .channel import channel_gain, effective_channel, gain_map
from .em import LoadConfig
from .errors import ConfigError, RCAError
from .estimate import (AngleGrid, recover_paths, reconstruct_channel, sample_on_grid_paths,
                       snap_to_grid, synthesize_measurements)
from .layout import random_feasible_xy
from .optimize import optimize_joint, optimize_loads, optimize_positions, quantize_positions
from .planner import assign_targets, plan_trajectories
from .scenario import load_scenario

log = logging.getLogger("rcasim")


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def cmd_gainmap(scenario, out, coupler=None):
    idx = scenario.gainmap["coupler_index"] if coupler is None else coupler
    pathset = ex.scenario_pathset(scenario, 0)
    x, y, g = gain_map(scenario.layout(), pathset, scenario.loads(), scenario.spec(), idx,
                       scenario.gainmap["resolution"])
    rows = []
    for i, yy in enumerate(y):
        for j, xx in enumerate(x):
            masked = np.isnan(g[i, j])
            rows.append((xx, yy, "" if masked else g[i, j], masked))
    write_csv(out, ["x_m", "y_m", "gain_db", "masked"], rows)


def cmd_compare(scenario, out, seeds=None, threads=1):
    rows, per_seed = ex.run_comparison(scenario, seeds, threads)
    cols = ["scheme", "tx_power_w", "mean_rate", "std_rate", "seeds", "failed"]
    write_csv(out, cols, [[r[c] for c in cols] for r in rows])
    for i, r in enumerate(per_seed):
        if "error" in r:
            log.warning("seed %d failed: %s", i, r["error"])
    return rows


def _optimize(scenario, index=0):
    spec, layout, loads = scenario.spec(), scenario.layout(), scenario.loads()
    pathset = ex.scenario_pathset(scenario, index)
    cfg = scenario.optimizer_config(ex.seed_int(scenario.seed, index, ex.OPTIMIZER))
    scale = scenario.tx_powers[scenario.middle_power_index()] / scenario.noise_power
    if scenario.optimize_mode == "positions":
        trace = optimize_positions(layout, pathset, loads, cfg, spec, scale)
    elif scenario.optimize_mode == "loads":
        loads, trace = optimize_loads(layout, pathset, scenario.load_bounds, cfg, spec, scale,
                                      sign_convention=scenario.sign_convention)
    else:
        _, loads, trace = optimize_joint(layout, pathset, scenario.load_bounds, cfg, spec, scale,
                                         sign_convention=scenario.sign_convention)
    return pathset, trace, trace.final_loads if trace.final_loads is not None else loads


def cmd_optimize(scenario, out):
    pathset, trace, loads = _optimize(scenario)
    write_csv(out, ["iteration", "snr", "rate"],
              [(i, s, np.log2(1.0 + s)) for i, s in enumerate(trace.objectives)])
    final = trace.final_layout
    quant = None
    step = scenario.optimizer["quantization_step"]
    if step:
        scale = scenario.tx_powers[scenario.middle_power_index()] / scenario.noise_power
        quant = quantize_positions(trace, step, pathset, scenario.spec(), loads, scale).layout
    rows = []
    for c in range(final.n_couplers):
        xq = quant.coupler_positions[c] if quant is not None else ("", "", "")
        rows.append((c, final.coupler_owner[c], *final.coupler_positions[c],
                     loads.loads[c].real, loads.loads[c].imag, *xq))
    out = Path(out)
    write_csv(out.with_name(out.stem + "_positions" + out.suffix),
              ["coupler", "owner", "x_m", "y_m", "z_m", "load_real_ohm", "load_imag_ohm",
               "xq_m", "yq_m", "zq_m"], rows)


def cmd_estimate(scenario, out):
    est = scenario.estimator
    spec, layout, loads = scenario.spec(), scenario.layout(), scenario.loads()
    grid = AngleGrid(est["n_azimuth"], est["n_elevation"])
    K = est["sparsity"]
    rng = ex.seed_rng(scenario.seed, 0, ex.ESTIMATOR)
    if est["on_grid"]:
        truth = sample_on_grid_paths(K, grid, rng, scenario.large_scale_gain, min_separation=10)
    else:
        truth = ex.scenario_pathset(scenario, 0)
    n_snap = est["snapshots"] or 4 * K
    snaps = [layout.with_coupler_xy(random_feasible_xy(layout, rng)) for _ in range(n_snap)]
    ms = synthesize_measurements(truth, snaps, loads, est["noise_variance"],
                                 ex.seed_int(scenario.seed, 0, ex.ESTIMATOR), spec)
    paths = recover_paths(ms, grid, K, spec)
    rows = []
    for h in range(est["holdout"]):
        lay = layout.with_coupler_xy(random_feasible_xy(layout, rng))
        true_h = effective_channel(lay, truth, loads, spec)
        est_h = reconstruct_channel(paths, lay, loads, spec)
        tn = np.linalg.norm(true_h)
        rows.append((h, tn, np.linalg.norm(est_h), np.linalg.norm(true_h - est_h) / tn))
    write_csv(out, ["holdout", "true_norm", "est_norm", "rel_error"], rows)


def cmd_plan(scenario, out):
    _, trace, _ = _optimize(scenario)
    initial, target = scenario.layout(), trace.final_layout
    assignment, _ = assign_targets(initial, target)
    plan = plan_trajectories(assignment, initial, target, scenario.planner["speed"],
                             scenario.wavelength)
    rows = []
    for c, wps in enumerate(plan.waypoints):
        for t, p in wps:
            rows.append((t, c, *p))
    rows.sort(key=lambda r: (r[0], r[1]))
    write_csv(out, ["time_s", "coupler", "x_m", "y_m", "z_m"], rows)


def build_parser():
    p = argparse.ArgumentParser(prog="rcasim", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("gainmap", "compare", "optimize", "estimate", "plan"):
        s = sub.add_parser(name)
        s.add_argument("--scenario", required=True, help="JSON scenario file")
        s.add_argument("--out", required=True, help="output CSV path")
        s.add_argument("--seeds", type=int, default=None, help="override the seed count")
        s.add_argument("--threads", type=int, default=1, help="worker threads")
        if name == "gainmap":
            s.add_argument("--coupler", type=int, default=None, help="coupler to sweep")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scenario = load_scenario(args.scenario)
        if args.seeds is not None:
            if args.seeds < 1:
                raise ConfigError("--seeds must be >= 1")
            scenario.seeds = args.seeds
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "gainmap":
            cmd_gainmap(scenario, args.out, args.coupler)
        elif args.command == "compare":
            cmd_compare(scenario, args.out, scenario.seeds, args.threads)
        elif args.command == "optimize":
            cmd_optimize(scenario, args.out)
        elif args.command == "estimate":
            cmd_estimate(scenario, args.out)
        else:
            cmd_plan(scenario, args.out)
    except RCAError as exc:
        print(f"rcasim: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
