"""Acceptance criteria at the desk-scale configuration (M=3, N=2, 0.04 m, 13 paths).

Each test records one pass/fail line, printed in the pytest terminal summary.
"""

import time

import numpy as np
import pytest

from rcasim import (AngleGrid, DipoleSpec, LoadConfig, assemble_impedances, assign_targets,
                    effective_channel, gain_map, mechanical_weights, mutual_impedance_side_by_side,
                    optimize_positions, plan_trajectories, recover_paths, reconstruct_channel,
                    sample_pathset, self_impedance, synthesize_measurements, ula_layout)
from rcasim.cli import main
from rcasim.em import weight_residual
from rcasim.errors import PlanningError
from rcasim.estimate import sample_on_grid_paths
from rcasim.experiments import run_comparison, scenario_pathset, seed_int, OPTIMIZER
from rcasim.layout import ArrayLayout, random_feasible_xy
from rcasim.optimize import _PositionObjective
from rcasim.planner import verify_plan
from rcasim.scenario import Scenario

from oracles import brute_force_assignment, random_search

LAM = 0.04
pytestmark = pytest.mark.acceptance


def _canonical():
    return ula_layout(3, 2, LAM, d_min=0.2 * LAM)


def test_c1_impedance_golden_values(criterion):
    t0 = time.perf_counter()
    spec = DipoleSpec(LAM)
    z11 = self_impedance(spec)
    z05 = mutual_impedance_side_by_side(0.5 * LAM, spec)
    z10 = mutual_impedance_side_by_side(1.0 * LAM, spec)
    elapsed = time.perf_counter() - t0
    errs = [abs(z11.real - 73.13), abs(z11.imag - 42.54), abs(z05.real + 12.53),
            abs(z05.imag + 29.93), abs(z10.real - 4.01), abs(z10.imag - 17.73)]
    ok = max(errs) < 0.1 and elapsed < 1.0
    criterion(1, ok, f"Z11={z11:.4f} Z(0.5)={z05:.4f} Z(1.0)={z10:.4f} "
                     f"max dev {max(errs):.3f} ohm, {elapsed:.3f} s")
    assert ok


def test_c2_weight_residual(criterion):
    t0 = time.perf_counter()
    spec = DipoleSpec(LAM)
    lay = _canonical()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        sample = lay.with_coupler_xy(random_feasible_xy(lay, rng))
        loads = LoadConfig.reactive(rng.uniform(-300, 300, 6))
        Z = assemble_impedances(sample, spec)
        worst = max(worst, weight_residual(Z, loads, mechanical_weights(Z, loads)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 5.0
    criterion(2, ok, f"worst relative residual {worst:.2e} over 100 layouts, {elapsed:.2f} s")
    assert ok


def test_c3_open_circuit_limit(criterion):
    spec = DipoleSpec(LAM)
    lay = _canonical()
    bare = ArrayLayout(lay.active_positions, np.zeros((0, 3)), [], lay.region_half_width,
                       lay.d_min)
    rng = np.random.default_rng(3)
    worst = 0.0
    for s in range(50):
        p = sample_pathset(13, 1000 + s)
        sample = lay.with_coupler_xy(random_feasible_xy(lay, rng))
        h0 = effective_channel(bare, p, LoadConfig.short(0), spec)
        h = effective_channel(sample, p, LoadConfig.open(6, 1e9), spec)
        worst = max(worst, np.linalg.norm(h - h0) / np.linalg.norm(h0))
    ok = worst < 1e-6
    criterion(3, ok, f"worst relative deviation {worst:.2e} over 50 scenarios")
    assert ok


def _strict_local_maxima(g):
    """Unmasked cells strictly above every unmasked 8-neighbour."""
    n, m = g.shape
    pad = np.full((n + 2, m + 2), -np.inf)
    pad[1:-1, 1:-1] = np.where(np.isnan(g), -np.inf, g)
    centre = pad[1:-1, 1:-1]
    peak = np.isfinite(centre)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                peak &= centre > pad[1 + di:n + 1 + di, 1 + dj:m + 1 + dj]
    return int(peak.sum())


@pytest.mark.slow
def test_c4_gain_map_irregularity(criterion):
    t0 = time.perf_counter()
    sc = Scenario()
    spec, lay, loads = sc.spec(), sc.layout(), sc.loads()
    spreads, multi = [], []
    for s in range(50):
        _, _, g = gain_map(lay, scenario_pathset(sc, s), loads, spec, 0, 101)
        spreads.append(np.nanmax(g) - np.nanmin(g))
        multi.append(_strict_local_maxima(g) >= 2)
    elapsed = time.perf_counter() - t0
    med, frac = float(np.median(spreads)), float(np.mean(multi))
    ok = med >= 6.0 and frac >= 0.8 and elapsed < 120
    criterion(4, ok, f"median spread {med:.2f} dB (need >= 6), "
                     f">=2 local maxima in {frac:.0%} of seeds (need >= 80%), {elapsed:.1f} s")
    assert ok


@pytest.mark.slow
def test_c5_scheme_ordering(criterion):
    t0 = time.perf_counter()
    sc = Scenario(seeds=100)
    rows, per_seed = run_comparison(sc, 100, threads=1)
    elapsed = time.perf_counter() - t0
    k = sc.middle_power_index()
    p = sc.tx_powers[k]
    mean = {r["scheme"]: r["mean_rate"] for r in rows if r["tx_power_w"] == p}
    failed = rows[0]["failed"]
    dominance = all(r["rates"]["rca-opt"][k] >= r["rates"]["fixed"][k]
                    for r in per_seed if "error" not in r)
    ok = (mean["rca-opt"] > mean["espar"] >= mean["fixed"] and dominance and failed == 0
          and elapsed < 900)
    criterion(5, ok, f"at {p:.3g} W: rca-opt {mean['rca-opt']:.3f} > espar {mean['espar']:.3f} "
                     f">= fixed {mean['fixed']:.3f}; per-seed dominance {dominance}; "
                     f"fully-active {mean['fully-active']:.3f} "
                     f"(rca-opt margin {mean['rca-opt'] - mean['fully-active']:+.3f}, not asserted); "
                     f"{failed} failed seeds, {elapsed:.0f} s")
    assert ok


@pytest.mark.slow
def test_c6_optimizer_vs_random_search(criterion):
    t0 = time.perf_counter()
    sc = Scenario()
    spec, lay, loads = sc.spec(), sc.layout(), sc.loads()
    ratios = []
    for s in range(10):
        p = scenario_pathset(sc, s)
        tr = optimize_positions(lay, p, loads, sc.optimizer_config(seed_int(sc.seed, s, OPTIMIZER)),
                                spec)
        ref = random_search(_PositionObjective(lay, p, loads, spec), lay, 1_000_000,
                            np.random.default_rng(600 + s))
        ratios.append(tr.objective / ref)
    elapsed = time.perf_counter() - t0
    ok = min(ratios) >= 0.98 and elapsed < 600
    criterion(6, ok, f"optimizer / 1e6-sample search: min {min(ratios):.4f}, "
                     f"mean {np.mean(ratios):.4f} over 10 seeds, {elapsed:.0f} s")
    assert ok


def test_c7_estimation_exactness(criterion):
    spec = DipoleSpec(LAM)
    lay = _canonical()
    loads = LoadConfig.short(6)
    grid = AngleGrid()
    worst = 0.0
    for s in range(10):
        rng = np.random.default_rng(700 + s)
        truth = sample_on_grid_paths(3, grid, rng)
        snaps = [lay.with_coupler_xy(random_feasible_xy(lay, rng)) for _ in range(12)]
        est = recover_paths(synthesize_measurements(truth, snaps, loads, 0.0, s, spec), grid, 3,
                            spec)
        for _ in range(50):
            hold = lay.with_coupler_xy(random_feasible_xy(lay, rng))
            h = effective_channel(hold, truth, loads, spec)
            err = np.linalg.norm(reconstruct_channel(est, hold, loads, spec) - h) / np.linalg.norm(h)
            worst = max(worst, err)
    ok = worst < 1e-6
    criterion(7, ok, f"worst hold-out relative error {worst:.2e} (10 instances x 50 layouts)")
    assert ok


def test_c8_planner(criterion):
    rng = np.random.default_rng(8)
    d_min = 0.2 * LAM
    optimal, plans, verified = 0, 0, 0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        pts = [rng.uniform(-LAM, LAM, (n, 2)) for _ in range(2)]
        init, target = (ArrayLayout([[0.0, 0.0, 0.0]], np.column_stack([q, np.zeros(n)]),
                                    [0] * n, LAM, d_min) for q in pts)
        assignment, total = assign_targets(init, target)
        cost = np.linalg.norm(init.coupler_positions[:, None] - target.coupler_positions[None],
                              axis=-1)
        optimal += abs(total - brute_force_assignment(cost)[0]) <= 1e-12 * max(total, 1e-3)
    lay = _canonical()
    for _ in range(30):
        a = lay.with_coupler_xy(random_feasible_xy(lay, rng))
        b = lay.with_coupler_xy(random_feasible_xy(lay, rng))
        assignment, _ = assign_targets(a, b)
        try:
            plan = plan_trajectories(assignment, a, b, 0.01, LAM)
        except PlanningError:
            continue
        plans += 1
        verified += verify_plan(plan, a, LAM / 100) >= d_min - 1e-9
    ok = optimal == 100 and plans > 0 and verified == plans
    criterion(8, ok, f"{optimal}/100 assignments match exhaustive search; "
                     f"{verified}/{plans} emitted plans pass lambda/100 verification")
    assert ok


def test_c9_thread_determinism(criterion, tmp_path):
    sc = tmp_path / "canonical.json"
    sc.write_text('{"wavelength": 0.04, "M": 3, "N": 2, "L": 13}')
    outs = []
    for threads in (1, 8):
        out = tmp_path / f"compare_{threads}.csv"
        assert main(["compare", "--scenario", str(sc), "--out", str(out), "--seeds", "8",
                     "--threads", str(threads)]) == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1]
    criterion(9, ok, f"compare CSV (8 seeds) byte-identical for 1 and 8 threads: {ok}")
    assert ok
