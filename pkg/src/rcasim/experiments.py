"""Seeded multi-scheme experiments.

Seed hierarchy: the scenario's master seed and a seed index define an
independent substream (``SeedSequence(master, spawn_key=(index, purpose))``),
so a seed's results never depend on how many seeds run or in what order.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .channel import _sample_pathset, channel_gain, effective_channel
from .errors import RCAError
from .optimize import baseline_fully_active, optimize_loads, optimize_positions

CHANNEL, OPTIMIZER, ESTIMATOR = 0, 1, 2


def substream(master, index, purpose):
    return np.random.SeedSequence(int(master), spawn_key=(int(index), int(purpose)))


def seed_rng(master, index, purpose):
    return np.random.default_rng(substream(master, index, purpose))


def seed_int(master, index, purpose):
    return int(substream(master, index, purpose).generate_state(1, dtype=np.uint32)[0])


def scenario_pathset(scenario, index):
    return _sample_pathset(scenario.L, seed_rng(scenario.seed, index, CHANNEL),
                           scenario.large_scale_gain)


def _rates(gain, scenario):
    return [float(np.log2(1.0 + p * gain / scenario.noise_power)) for p in scenario.tx_powers]


def run_seed(scenario, index):
    """Rates of every configured scheme for one channel seed.

    Returns ``{"rates": {scheme: [rate per power]}, "gains": {...}}``.
    """
    spec = scenario.spec()
    layout = scenario.layout()
    loads = scenario.loads()
    pathset = scenario_pathset(scenario, index)
    cfg = scenario.optimizer_config(seed_int(scenario.seed, index, OPTIMIZER))
    gains = {}
    for scheme in scenario.schemes:
        if scheme == "fixed":
            gains[scheme] = float(channel_gain(effective_channel(layout, pathset, loads, spec)))
        elif scheme == "rca-opt":
            trace = optimize_positions(layout, pathset, loads, cfg, spec)
            gains[scheme] = trace.objective
        elif scheme == "espar":
            _, trace = optimize_loads(layout, pathset, scenario.load_bounds, cfg, spec,
                                      init_reactances=np.full(layout.n_couplers,
                                                              scenario.coupler_load[1]),
                                      sign_convention=scenario.sign_convention)
            gains[scheme] = trace.objective
        elif scheme == "fully-active":
            rate = baseline_fully_active(scenario.M, scenario.N, scenario.fully_active_spacing,
                                         pathset, 1.0, 1.0, scenario.wavelength)
            gains[scheme] = float(2.0 ** rate - 1.0)
    return {"rates": {s: _rates(g, scenario) for s, g in gains.items()}, "gains": gains}


def _safe_run(scenario, index):
    try:
        return run_seed(scenario, index)
    except RCAError as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


def map_seeds(fn, scenario, n_seeds, threads=1):
    """Apply ``fn(scenario, index)`` to every seed index; results in index order."""
    indices = range(n_seeds)
    if threads <= 1:
        return [fn(scenario, i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: fn(scenario, i), indices))


def run_comparison(scenario, n_seeds=None, threads=1):
    """Mean and standard deviation of the rate per scheme and transmit power.

    Returns ``(rows, per_seed)``; each row is a dict with keys scheme,
    tx_power_w, mean_rate, std_rate, seeds, failed. Seeds that raised are
    excluded from the statistics and counted in ``failed``.
    """
    n_seeds = scenario.seeds if n_seeds is None else n_seeds
    per_seed = map_seeds(_safe_run, scenario, n_seeds, threads)
    ok = [r for r in per_seed if "error" not in r]
    failed = len(per_seed) - len(ok)
    rows = []
    for scheme in scenario.schemes:
        table = np.array([r["rates"][scheme] for r in ok]).reshape(len(ok), len(scenario.tx_powers))
        for k, p in enumerate(scenario.tx_powers):
            col = table[:, k]
            rows.append({
                "scheme": scheme,
                "tx_power_w": p,
                "mean_rate": float(col.mean()) if len(col) else float("nan"),
                "std_rate": float(col.std()) if len(col) else float("nan"),
                "seeds": len(col),
                "failed": failed,
            })
    return rows, per_seed
