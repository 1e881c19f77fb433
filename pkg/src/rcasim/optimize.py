"""Coupler placement and load tuning.

Placement uses parallel per-coupler finite-difference gradients, a shared
Armijo backtracking step and a feasibility projection after every move.
Every accepted step increases the objective, so traces are nondecreasing.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import channel_gain, effective_channel_batch, port_channels
from .em import LoadConfig, impedance_matrix, solve_weights
from .errors import ConfigError, ProjectionError, QuantizationError, SpacingError
from .layout import ArrayLayout, FEASIBILITY_TOL, random_feasible_xy

PROJECTION_MAX_ITER = 50
_PUSH_MARGIN = 1e-9
_MAX_BACKTRACKS = 30
_CHUNK = 4


@dataclass(frozen=True)
class OptimizationConfig:
    """Optimizer settings.

    Lengths are in meters; ``None`` means a wavelength-relative default
    (``step_init`` 0.1 wavelength, ``fd_epsilon`` wavelength / 1000).
    ``step_init = 0`` freezes coupler positions. Both that and
    ``max_outer_iterations = 0`` skip the random restarts.
    """

    max_outer_iterations: int = 200
    step_init: float = None
    armijo_shrink: float = 0.5
    armijo_slope: float = 1e-4
    tolerance: float = 1e-7
    restarts: int = 8
    fd_epsilon: float = None
    quantization_step: float = None
    seed: int = 0
    load_step_init: float = 100.0
    load_fd_epsilon: float = 1e-3

    def __post_init__(self):
        if not (isinstance(self.max_outer_iterations, (int, np.integer)) and self.max_outer_iterations >= 0):
            raise ConfigError("max_outer_iterations must be a nonnegative integer")
        if self.step_init is not None and not self.step_init >= 0:
            raise ConfigError("step_init must be nonnegative")
        if not 0 < self.armijo_shrink < 1:
            raise ConfigError("armijo_shrink must lie in (0, 1)")
        if not 0 < self.armijo_slope < 1:
            raise ConfigError("armijo_slope must lie in (0, 1)")
        if not 0 < self.tolerance <= 1:
            raise ConfigError("tolerance must lie in (0, 1]")
        if not (isinstance(self.restarts, (int, np.integer)) and self.restarts >= 1):
            raise ConfigError("restarts must be an integer >= 1")
        if self.fd_epsilon is not None and not self.fd_epsilon > 0:
            raise ConfigError("fd_epsilon must be positive")
        if self.quantization_step is not None and not self.quantization_step > 0:
            raise ConfigError("quantization_step must be positive")
        if not (self.load_step_init >= 0 and self.load_fd_epsilon > 0):
            raise ConfigError("load_step_init must be >= 0 and load_fd_epsilon > 0")

    def resolved(self, wavelength):
        step = 0.1 * wavelength if self.step_init is None else self.step_init
        eps = wavelength / 1000.0 if self.fd_epsilon is None else self.fd_epsilon
        return replace(self, step_init=step, fd_epsilon=eps)


@dataclass(eq=False)
class OptimizationTrace:
    """Outcome of a (multi-start) optimization run.

    ``objectives`` holds the SNR (linear) after each accepted outer
    iteration of the best restart, starting with its initial value.
    """

    objectives: list
    final_layout: ArrayLayout
    restart_index_of_best: int = 0
    evaluations: int = 0
    final_loads: LoadConfig = None
    restart_objectives: list = field(default_factory=list)

    @property
    def objective(self):
        return self.objectives[-1]


# -- feasibility ---------------------------------------------------------------

def _clamp(layout, xy):
    c = layout.owner_xy
    hw = layout.region_half_width
    return np.clip(xy, c - hw, c + hw)


def _pair_pushes(xy, d_min, fallback):
    """Symmetric displacements separating every too-close pair of points."""
    n = len(xy)
    push = np.zeros_like(xy)
    if n < 2:
        return push, False
    diff = xy[:, None, :] - xy[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    i, j = np.nonzero(np.triu(dist < d_min - FEASIBILITY_TOL, 1))
    for a, b in zip(i, j):
        d = dist[a, b]
        u = diff[b, a] / d if d > 0 else fallback
        amount = 0.5 * (d_min * (1 + _PUSH_MARGIN) - d)
        push[a] -= amount * u
        push[b] += amount * u
    return push, len(i) > 0


def _project_xy(layout, xy):
    xy = np.array(xy, dtype=float)
    if layout.n_couplers == 0:
        return xy
    active = layout.active_positions[:, :2]
    fallback = np.array([1.0, 0.0])
    for _ in range(PROJECTION_MAX_ITER):
        xy = _clamp(layout, xy)
        push, hit = _pair_pushes(xy, layout.d_min, fallback)
        xy = xy + push
        diff = xy[:, None, :] - active[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        ci, ai = np.nonzero(dist < layout.d_min - FEASIBILITY_TOL)
        move = np.zeros_like(xy)
        for c, a in zip(ci, ai):
            d = dist[c, a]
            u = diff[c, a] / d if d > 0 else fallback
            move[c] += (layout.d_min * (1 + _PUSH_MARGIN) - d) * u
        xy = xy + move
        if not hit and len(ci) == 0:
            clamped = _clamp(layout, xy)
            if np.array_equal(clamped, xy):
                return xy
    xy = _clamp(layout, xy)
    if layout.with_coupler_xy(xy).closest_violating_pair() is None:
        return xy
    raise ProjectionError(
        f"feasibility projection did not converge in {PROJECTION_MAX_ITER} iterations")


def project_feasible(layout):
    """Nearest-effort feasible copy of ``layout``; returns feasible input unchanged."""
    if layout.is_feasible():
        return layout
    return layout.with_coupler_xy(_project_xy(layout, layout.coupler_xy))


# -- objectives ------------------------------------------------------------------

class _PositionObjective:
    """Channel gain as a function of in-plane coupler coordinates."""

    def __init__(self, layout, pathset, loads, spec):
        self.layout = layout
        self.pathset = pathset
        self.loads = loads
        self.spec = spec
        self.evaluations = 0

    def __call__(self, xy_batch):
        xy_batch = np.asarray(xy_batch, dtype=float)
        pos = np.repeat(self.layout.coupler_positions[None], len(xy_batch), axis=0)
        pos[:, :, :2] = xy_batch
        self.evaluations += len(xy_batch)
        h = effective_channel_batch(self.layout.active_positions, pos, self.loads,
                                    self.pathset, self.spec)
        return channel_gain(h)


class _LoadObjective:
    """Channel gain as a function of coupler reactances for a fixed layout."""

    def __init__(self, layout, pathset, spec, sign=-1):
        M = layout.n_active
        Z = impedance_matrix(layout.port_positions, spec)
        self.Zac, self.Zcc = Z[:M, M:], Z[M:, M:]
        h = port_channels(pathset, layout.port_positions, spec.wavelength)
        self.ha, self.hc = h[:M], h[M:]
        self.sign = sign
        self.evaluations = 0

    def __call__(self, x_batch):
        x_batch = np.asarray(x_batch, dtype=float)
        self.evaluations += len(x_batch)
        B = len(x_batch)
        W = solve_weights(np.broadcast_to(self.Zac, (B,) + self.Zac.shape),
                          np.broadcast_to(self.Zcc, (B,) + self.Zcc.shape),
                          1j * x_batch, self.sign)
        h = self.ha + np.einsum("c,bcm->bm", self.hc, W)
        return channel_gain(h)


def _central_gradient(f, x, eps, f0=None):
    """Central differences of ``f`` at ``x`` over all coordinates, one batch."""
    n = x.size
    steps = np.eye(n).reshape((n,) + x.shape) * eps
    batch = np.concatenate([x + steps, x - steps])
    vals = f(batch)
    return ((vals[:n] - vals[n:]) / (2 * eps)).reshape(x.shape)


def _ascend(f, x0, project, step_init, eps, cfg, block_axis):
    """Projected gradient ascent with a shared Armijo backtracking step.

    ``block_axis`` selects how the direction is normalized: per row for
    coupler blocks (so the fastest-moving block travels ``step_init``),
    or ``None`` for a global max-norm.
    """
    x = np.array(x0, dtype=float)
    fx = float(f(x[None])[0])
    objectives = [fx]
    t_start = step_init
    for _ in range(cfg.max_outer_iterations):
        if step_init == 0:
            break
        g = _central_gradient(f, x, eps)
        if block_axis is None:
            scale = np.max(np.abs(g))
        else:
            scale = np.max(np.linalg.norm(g, axis=block_axis))
        if not scale > 0:
            break
        d = g / scale
        accepted = None
        k = 0
        while accepted is None and k < _MAX_BACKTRACKS:
            ts = t_start * cfg.armijo_shrink ** np.arange(k, min(k + _CHUNK, _MAX_BACKTRACKS))
            k += len(ts)
            cands, deltas, steps = [], [], []
            for t in ts:
                try:
                    c = project(x + t * d)
                except ProjectionError:
                    continue
                cands.append(c)
                deltas.append(float(np.sum(g * (c - x))))
                steps.append(t)
            if not cands:
                continue
            vals = f(np.array(cands))
            for c, v, dl, t in zip(cands, vals, deltas, steps):
                if v > fx and v >= fx + cfg.armijo_slope * dl:
                    accepted = (c, float(v))
                    t_start = min(step_init, 2.0 * t)
                    break
        if accepted is None:
            break
        rel = (accepted[1] - fx) / abs(fx) if fx != 0 else np.inf
        x, fx = accepted
        objectives.append(fx)
        if rel < cfg.tolerance:
            break
    return x, objectives


def _restart_rngs(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _best_restart(results):
    """Index of the best final objective; lowest index wins ties."""
    best = 0
    for r, (_, obj) in enumerate(results):
        if obj[-1] > results[best][1][-1]:
            best = r
    return best


# -- public optimizers --------------------------------------------------------------

def optimize_positions(layout, pathset, loads, cfg, spec, snr_scale=1.0):
    """Maximize SNR over coupler positions with multi-start projected ascent.

    Restart 0 starts from ``layout``; the others from uniform-random
    feasible placements drawn from per-restart substreams of ``cfg.seed``.
    """
    if not isinstance(cfg, OptimizationConfig):
        raise ConfigError("cfg must be an OptimizationConfig")
    layout.check_feasible()
    rc = cfg.resolved(spec.wavelength)
    f = _PositionObjective(layout, pathset, loads, spec)
    idle = rc.step_init == 0 or rc.max_outer_iterations == 0 or layout.n_couplers == 0
    n_restarts = 1 if idle else rc.restarts
    rngs = _restart_rngs(rc.seed, n_restarts)
    results = []
    for r in range(n_restarts):
        xy0 = layout.coupler_xy if r == 0 else random_feasible_xy(layout, rngs[r])
        if layout.n_couplers == 0:
            results.append((xy0, [float(f(xy0[None])[0])]))
            continue
        results.append(_ascend(f, xy0, lambda xy: _project_xy(layout, xy),
                               rc.step_init, rc.fd_epsilon, rc, block_axis=-1))
    best = _best_restart(results)
    xy, obj = results[best]
    return OptimizationTrace(
        objectives=[snr_scale * v for v in obj],
        final_layout=layout.with_coupler_xy(xy),
        restart_index_of_best=best,
        evaluations=f.evaluations,
        final_loads=loads,
        restart_objectives=[snr_scale * o[-1] for _, o in results],
    )


def optimize_loads(layout, pathset, bounds, cfg, spec, snr_scale=1.0, init_reactances=None,
                   sign_convention=-1):
    """Maximize SNR over purely reactive coupler loads within ``bounds`` (ohms).

    Returns ``(loads, trace)``. Restart 0 starts from ``init_reactances``
    (default zero, clipped into the bounds); the rest are uniform in the box.
    """
    if not isinstance(cfg, OptimizationConfig):
        raise ConfigError("cfg must be an OptimizationConfig")
    x_min, x_max = map(float, bounds)
    if not x_min <= x_max:
        raise ConfigError("load bounds must satisfy x_min <= x_max")
    layout.check_feasible()
    C = layout.n_couplers
    x0 = np.zeros(C) if init_reactances is None else np.asarray(init_reactances, dtype=float)
    x0 = np.clip(x0, x_min, x_max)
    if C == 0:
        f = _PositionObjective(layout, pathset, LoadConfig.short(0, sign_convention), spec)
        obj = [float(f(np.zeros((1, 0, 2)))[0])]
        return LoadConfig.short(0, sign_convention), OptimizationTrace(
            [snr_scale * obj[0]], layout, 0, f.evaluations,
            LoadConfig.short(0, sign_convention), [snr_scale * obj[0]])
    f = _LoadObjective(layout, pathset, spec, sign_convention)
    frozen = x_min == x_max
    n_restarts = 1 if frozen or cfg.max_outer_iterations == 0 else cfg.restarts
    rngs = _restart_rngs(cfg.seed, n_restarts)
    step = 0.0 if frozen else min(cfg.load_step_init, x_max - x_min)
    results = []
    for r in range(n_restarts):
        start = x0 if r == 0 else rngs[r].uniform(x_min, x_max, C)
        results.append(_ascend(f, start, lambda x: np.clip(x, x_min, x_max), step,
                               cfg.load_fd_epsilon, cfg, block_axis=None))
    best = _best_restart(results)
    x, obj = results[best]
    loads = LoadConfig.reactive(x, sign_convention)
    return loads, OptimizationTrace(
        objectives=[snr_scale * v for v in obj],
        final_layout=layout,
        restart_index_of_best=best,
        evaluations=f.evaluations,
        final_loads=loads,
        restart_objectives=[snr_scale * o[-1] for _, o in results],
    )


def optimize_joint(layout, pathset, bounds, cfg, spec, snr_scale=1.0, init_reactances=None,
                   sign_convention=-1):
    """Alternate position and load passes from the better single-mode optimum.

    The position-only and load-only optimizers run first from the same
    initialization; alternation then continues from whichever is better, so
    the joint result dominates both. Returns ``(layout, loads, trace)``.
    """
    x_min, x_max = map(float, bounds)
    C = layout.n_couplers
    x0 = np.clip(np.zeros(C) if init_reactances is None else np.asarray(init_reactances, float),
                 x_min, x_max)
    loads0 = LoadConfig.reactive(x0, sign_convention)
    pos = optimize_positions(layout, pathset, loads0, cfg, spec)
    loads_only, ld = optimize_loads(layout, pathset, bounds, cfg, spec, 1.0, x0, sign_convention)
    if ld.objective > pos.objective:
        cur_layout, cur_x, cur = layout, loads_only.loads.imag.copy(), ld.objective
    else:
        cur_layout, cur_x, cur = pos.final_layout, x0, pos.objective
    evaluations = pos.evaluations + ld.evaluations
    objectives = [cur]
    single = replace(cfg, restarts=1)
    for _ in range(cfg.max_outer_iterations):
        p = optimize_positions(cur_layout, pathset, LoadConfig.reactive(cur_x, sign_convention),
                               single, spec)
        l_loads, l = optimize_loads(p.final_layout, pathset, bounds, single, spec, 1.0, cur_x,
                                    sign_convention)
        evaluations += p.evaluations + l.evaluations
        new = max(l.objective, cur)
        if l.objective >= cur:
            cur_layout, cur_x = p.final_layout, l_loads.loads.imag.copy()
        rel = (new - cur) / abs(cur) if cur else np.inf
        cur = new
        objectives.append(cur)
        if rel < cfg.tolerance:
            break
    loads = LoadConfig.reactive(cur_x, sign_convention)
    trace = OptimizationTrace([snr_scale * v for v in objectives], cur_layout, 0, evaluations,
                              loads, [snr_scale * pos.objective, snr_scale * ld.objective])
    return cur_layout, loads, trace


@dataclass
class QuantizationResult:
    layout: ArrayLayout
    objective: float
    continuous_objective: float
    naive_objective: float

    @property
    def loss(self):
        return self.continuous_objective - self.objective

    @property
    def naive_loss(self):
        return self.continuous_objective - self.naive_objective


def quantize_positions(trace, step, pathset, spec, loads=None, snr_scale=1.0):
    """Snap coupler positions to a grid of pitch ``step`` anchored at each owner.

    Starts from nearest-point rounding, then greedily moves couplers to
    their other bracketing grid points while that raises the objective and
    stays feasible. Infeasible rounding falls back to projection.
    """
    if not step > 0:
        raise ConfigError("quantization step must be positive")
    layout = trace.final_layout
    loads = trace.final_loads if loads is None else loads
    if loads is None:
        loads = LoadConfig.short(layout.n_couplers)
    f = _PositionObjective(layout, pathset, loads, spec)
    xy = layout.coupler_xy
    owner = layout.owner_xy
    rel = (xy - owner) / step
    naive = owner + step * np.round(rel)
    cont = float(f(xy[None])[0])
    naive_val = float(f(naive[None])[0])
    feasible = layout.with_coupler_xy(naive).is_feasible()
    if feasible:
        cur, cur_val = naive, naive_val
        lo, hi = owner + step * np.floor(rel), owner + step * np.ceil(rel)
        improved = True
        while improved:
            improved = False
            for c in range(layout.n_couplers):
                opts = np.array([[lo[c, 0], lo[c, 1]], [lo[c, 0], hi[c, 1]],
                                 [hi[c, 0], lo[c, 1]], [hi[c, 0], hi[c, 1]]])
                batch = np.repeat(cur[None], len(opts), axis=0)
                batch[:, c] = opts
                ok = [layout.with_coupler_xy(b).is_feasible() for b in batch]
                vals = f(batch)
                for b, v, good in zip(batch, vals, ok):
                    if good and v > cur_val:
                        cur, cur_val, improved = b, float(v), True
    else:
        try:
            cur = _project_xy(layout, naive)
        except ProjectionError as exc:
            raise QuantizationError(f"quantized layout cannot be made feasible: {exc}") from exc
        cur_val = float(f(cur[None])[0])
    return QuantizationResult(layout.with_coupler_xy(cur), snr_scale * cur_val,
                              snr_scale * cont, snr_scale * naive_val)


def fully_active_positions(n_ports, spacing, center=(0.0, 0.0, 0.0)):
    xs = (np.arange(n_ports) - (n_ports - 1) / 2.0) * spacing
    return np.column_stack([xs, np.zeros(n_ports), np.zeros(n_ports)]) + np.asarray(center)


def baseline_fully_active(M, N, spacing, pathset, tx_power, noise_power, wavelength):
    """Rate of an ideal uncoupled (MN + M)-element uniform line with MRT."""
    if not noise_power > 0:
        raise ConfigError("noise power must be positive")
    h = port_channels(pathset, fully_active_positions(M * N + M, spacing), wavelength)
    snr = tx_power * float(channel_gain(h)) / noise_power
    return float(np.log2(1.0 + snr))
