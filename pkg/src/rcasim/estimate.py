"""Pilot synthesis and grid-based path recovery.

Each snapshot observes the sum of the effective channels of all active
ports for one coupler placement. Since that sum is linear in the path
gains, a unit-gain path from each grid direction gives one dictionary
column, and matching pursuit picks the dominant directions.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import ELEVATION_LIMIT, PathSet, effective_channel
from .em import LoadConfig, assemble_impedances, mechanical_weights
from .errors import ConditioningError, DomainError

OPEN_CIRCUIT = 1e9
_RANK_COND = 1e10


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Pilot observations, one per coupler snapshot."""

    layouts: tuple
    loads: tuple
    observations: np.ndarray
    noise_variance: float = 0.0

    def __post_init__(self):
        obs = np.array(self.observations, dtype=complex).reshape(-1)
        if len(obs) < 1:
            raise DomainError("a measurement set needs at least one record")
        if not len(self.layouts) == len(self.loads) == len(obs):
            raise DomainError("layouts, loads and observations must align")
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "layouts", tuple(self.layouts))
        object.__setattr__(self, "loads", tuple(self.loads))

    def __len__(self):
        return len(self.observations)


@dataclass(frozen=True)
class AngleGrid:
    """Azimuth x elevation search grid.

    Azimuth covers ``[0, 2 pi)`` without the endpoint; elevation covers
    ``elevation_range`` including both ends.
    """

    n_azimuth: int = 64
    n_elevation: int = 16
    elevation_range: tuple = (-ELEVATION_LIMIT, ELEVATION_LIMIT)

    def __post_init__(self):
        if self.n_azimuth < 1 or self.n_elevation < 1:
            raise DomainError("grid sizes must be at least 1")

    @property
    def azimuths(self):
        return np.linspace(0.0, 2.0 * np.pi, self.n_azimuth, endpoint=False)

    @property
    def elevations(self):
        lo, hi = self.elevation_range
        if self.n_elevation == 1:
            return np.array([0.5 * (lo + hi)])
        return np.linspace(lo, hi, self.n_elevation)

    def angles(self):
        """Flattened ``(azimuth, elevation)`` arrays, azimuth varying fastest."""
        az, el = np.meshgrid(self.azimuths, self.elevations)
        return az.ravel(), el.ravel()

    def __len__(self):
        return self.n_azimuth * self.n_elevation


@dataclass(frozen=True, eq=False)
class EstimatedPaths(PathSet):
    """Recovered paths plus the squared norm of the fit residual."""

    residual: float = 0.0
    grid_indices: tuple = field(default=())


def _as_load_list(loads, n, n_couplers):
    if isinstance(loads, LoadConfig) or loads is None:
        loads = [loads if loads is not None else LoadConfig.short(n_couplers)] * n
    if len(loads) != n:
        raise DomainError("need one LoadConfig per layout")
    return list(loads)


def couplers_off(layout):
    """Open-circuit loads that decouple every coupler of ``layout``."""
    return LoadConfig.open(layout.n_couplers, OPEN_CIRCUIT)


def _port_weights(layout, loads, spec):
    """Per-port weights ``v`` such that the observation is ``v . h_ports``."""
    M = layout.n_active
    if layout.n_couplers == 0:
        return np.ones(M, dtype=complex)
    W = mechanical_weights(assemble_impedances(layout, spec), loads).W
    return np.concatenate([np.ones(M, dtype=complex), W @ np.ones(M)])


def synthesize_measurements(pathset, layouts, loads, noise_variance, seed, spec):
    """Noisy sums of active-port effective channels for each snapshot layout."""
    if noise_variance < 0:
        raise DomainError("noise variance must be nonnegative")
    layouts = list(layouts)
    if not layouts:
        raise DomainError("need at least one snapshot layout")
    load_list = _as_load_list(loads, len(layouts), layouts[0].n_couplers)
    clean = np.array([effective_channel(lay, pathset, ld, spec).sum()
                      for lay, ld in zip(layouts, load_list)])
    rng = np.random.default_rng(seed)
    noise = (rng.standard_normal(len(clean)) + 1j * rng.standard_normal(len(clean)))
    obs = clean + np.sqrt(noise_variance / 2.0) * noise
    return MeasurementSet(tuple(layouts), tuple(load_list), obs, float(noise_variance))


def dictionary(measurements, grid, spec):
    """Measurement response of a unit-gain path from every grid direction.

    Shape (records, grid size).
    """
    az, el = grid.angles()
    u = PathSet(az, el, np.ones(len(az))).directions
    k = 2.0 * np.pi / spec.wavelength
    rows = []
    for layout, loads in zip(measurements.layouts, measurements.loads):
        v = _port_weights(layout, loads, spec)
        rows.append(v @ np.exp(1j * k * (layout.port_positions @ u.T)))
    return np.array(rows)


def _distinct_columns(A):
    """Mask keeping the first of every group of exactly equal columns."""
    seen = set()
    keep = np.zeros(A.shape[1], dtype=bool)
    for j in range(A.shape[1]):
        key = A[:, j].tobytes()
        if key not in seen:
            seen.add(key)
            keep[j] = True
    return keep


class _Pursuit:
    """Depth-first matching pursuit over supports.

    Candidates at each level are ranked by the residual energy they remove
    once the current support is projected out. The first leaf reached is
    plain greedy pursuit; further leaves are visited only while the residual
    stays above ``stop`` and the node budget lasts. The final level always
    scans every atom.
    """

    def __init__(self, A, y, K, widths, max_nodes, stop):
        self.A, self.y, self.K = A, y, K
        self.widths = widths
        self.max_nodes = max_nodes
        self.stop = stop
        self.keep = _distinct_columns(A)
        self.nodes = 0
        self.best = (None, np.inf)
        self.seen = set()

    def _scores(self, support):
        A, y = self.A, self.y
        if support:
            Q = np.linalg.qr(A[:, support])[0]
            r = y - Q @ (Q.conj().T @ y)
            Ap = A - Q @ (Q.conj().T @ A)
        else:
            r, Ap = y, A
        n2 = np.sum(np.abs(Ap) ** 2, axis=0)
        ok = self.keep & (n2 > 1e-20 * n2.max())
        gain = np.full(A.shape[1], -1.0)
        gain[ok] = np.abs(Ap[:, ok].conj().T @ r) ** 2 / n2[ok]
        gain[support] = -1.0
        return float(np.vdot(r, r).real), gain

    def run(self):
        self._visit([])
        return self.best

    def _visit(self, support):
        key = frozenset(support)
        if key in self.seen:
            return False
        self.seen.add(key)
        self.nodes += 1
        energy, gain = self._scores(support)
        if len(support) == self.K - 1:
            j = int(np.argmax(gain))
            res = energy - max(gain[j], 0.0)
            if res < self.best[1]:
                self.best = (support + [j], res)
            return res <= self.stop
        width = self.widths[len(support)] if len(support) < len(self.widths) else 1
        order = np.argsort(-gain, kind="stable")[:width]
        for j in order:
            if gain[j] < 0 or self.nodes >= self.max_nodes:
                break
            if self._visit(support + [int(j)]):
                return True
        return False


def recover_paths(measurements, grid, K, spec, widths=(512, 64), max_nodes=100000,
                  stop=None):
    """Recover ``K`` grid paths by matching pursuit with backtracking.

    Greedy selection is tried first; if its residual stays above ``stop``
    (default: numerical zero plus the noise energy a correct support
    leaves behind, padded by four standard deviations), other
    supports are explored depth-first with ``widths[i]`` branches at level
    ``i``. Gains of the best support are refit by least squares.
    """
    if K < 0:
        raise DomainError("sparsity must be nonnegative")
    y = measurements.observations
    empty = np.zeros(0)
    energy = float(np.vdot(y, y).real)
    if K == 0:
        return EstimatedPaths(empty, empty, empty, 1.0, residual=energy)
    if len(y) < 2 * K:
        raise DomainError(f"need at least {2 * K} records for sparsity {K}, got {len(y)}")
    A = dictionary(measurements, grid, spec)
    if stop is None:
        dof = max(len(y) - K, 0)
        stop = 1e-20 * energy + measurements.noise_variance * (dof + 4.0 * np.sqrt(dof))
    support, _ = _Pursuit(A, y, K, widths, max_nodes, stop).run()
    if support is None:
        raise ConditioningError("no linearly independent support found")
    sub = A[:, support]
    if np.linalg.cond(sub) > _RANK_COND:
        raise ConditioningError("selected dictionary columns are rank deficient")
    gains = np.linalg.lstsq(sub, y, rcond=None)[0]
    r = y - sub @ gains
    az, el = grid.angles()
    idx = np.array(support)
    return EstimatedPaths(az[idx], el[idx], gains, 1.0,
                          residual=float(np.vdot(r, r).real), grid_indices=tuple(support))


def reconstruct_channel(estimate, layout, loads, spec):
    """Effective channel of ``layout`` predicted from recovered paths."""
    return effective_channel(layout, estimate, loads, spec)


def snap_to_grid(pathset, grid):
    """Move every path to its nearest grid direction (by angle indices)."""
    az_g, el_g = grid.azimuths, grid.elevations
    ia = np.argmin(np.abs(np.angle(np.exp(1j * (pathset.azimuth[:, None] - az_g[None])))), axis=1)
    ie = np.argmin(np.abs(pathset.elevation[:, None] - el_g[None]), axis=1)
    return PathSet(az_g[ia], el_g[ie], pathset.gain, pathset.large_scale_gain)


def sample_on_grid_paths(K, grid, rng, large_scale_gain=1.0, min_separation=2):
    """Draw ``K`` grid directions with distinct azimuth bins at least
    ``min_separation`` apart (cyclically) and CN(0, 1/K) gains."""
    for _ in range(1000):
        ia = rng.choice(grid.n_azimuth, size=K, replace=False)
        gaps = np.abs(ia[:, None] - ia[None])
        gaps = np.minimum(gaps, grid.n_azimuth - gaps) + np.eye(K, dtype=int) * grid.n_azimuth
        if K <= 1 or gaps.min() >= min_separation:
            break
    ie = rng.integers(0, grid.n_elevation, size=K)
    g = (rng.standard_normal(K) + 1j * rng.standard_normal(K)) / np.sqrt(2.0 * K)
    return PathSet(grid.azimuths[ia], grid.elevations[ie], g, large_scale_gain)
