"""Array geometry: fixed active dipoles and movable couplers.

All dipoles are parallel to the z axis and their centers share ``z``; the
couplers move in the x-y plane inside a square region centered on the
active antenna that owns them.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, SpacingError

FEASIBILITY_TOL = 1e-12


def _points(values, name):
    arr = np.array(values, dtype=float).reshape(-1, 3) if len(values) else np.zeros((0, 3))
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class ArrayLayout:
    """Positions of all ports of an RCA array.

    Parameters
    ----------
    active_positions : array_like, shape (M, 3)
    coupler_positions : array_like, shape (C, 3)
    coupler_owner : array_like of int, shape (C,)
        Index of the active antenna (RCA) each coupler belongs to.
    region_half_width : float
        Half side of each owner's square movement region, in meters.
    d_min : float
        Minimum center-to-center spacing between any coupler and any
        other port, in meters.
    """

    active_positions: np.ndarray
    coupler_positions: np.ndarray
    coupler_owner: np.ndarray
    region_half_width: float
    d_min: float

    def __post_init__(self):
        act = _points(self.active_positions, "active_positions")
        cpl = _points(self.coupler_positions, "coupler_positions")
        owner = np.asarray(self.coupler_owner, dtype=int).reshape(-1)
        if len(act) == 0:
            raise DomainError("layout needs at least one active antenna")
        if len(owner) != len(cpl):
            raise DomainError("coupler_owner must have one entry per coupler")
        if len(owner) and (owner.min() < 0 or owner.max() >= len(act)):
            raise DomainError("coupler_owner refers to a missing active antenna")
        if self.region_half_width < 0 or self.d_min < 0:
            raise DomainError("region_half_width and d_min must be nonnegative")
        for name, arr in (("active_positions", act), ("coupler_positions", cpl), ("coupler_owner", owner)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "region_half_width", float(self.region_half_width))
        object.__setattr__(self, "d_min", float(self.d_min))

    @property
    def n_active(self):
        return len(self.active_positions)

    @property
    def n_couplers(self):
        return len(self.coupler_positions)

    @property
    def port_positions(self):
        """Actives first, then couplers."""
        return np.vstack([self.active_positions, self.coupler_positions])

    @property
    def coupler_xy(self):
        return self.coupler_positions[:, :2].copy()

    @property
    def owner_xy(self):
        """In-plane center of each coupler's region."""
        return self.active_positions[self.coupler_owner, :2]

    def with_coupler_xy(self, xy):
        """Copy of the layout with couplers moved to the in-plane points ``xy``."""
        xy = np.asarray(xy, dtype=float).reshape(self.n_couplers, 2)
        pos = self.coupler_positions.copy()
        pos[:, :2] = xy
        return replace(self, coupler_positions=pos)

    def violations(self, tol=FEASIBILITY_TOL):
        """List of human-readable feasibility violations (empty if feasible)."""
        out = []
        z0 = self.active_positions[0, 2]
        if np.any(np.abs(self.port_positions[:, 2] - z0) > tol):
            out.append("port centers are not coplanar")
        off = np.abs(self.coupler_xy - self.owner_xy).max(axis=1) if self.n_couplers else []
        for c, o in enumerate(off):
            if o > self.region_half_width + tol:
                out.append(f"coupler {c} outside its region by {o - self.region_half_width:.3g} m")
        pair = self.closest_violating_pair(tol)
        if pair is not None:
            i, j, d = pair
            out.append(f"ports {i} and {j} are {d:.6g} m apart (< d_min {self.d_min:.6g} m)")
        return out

    def closest_violating_pair(self, tol=FEASIBILITY_TOL):
        """Return ``(i, j, distance)`` of the worst d_min violation, or None.

        Port indices follow :attr:`port_positions`. Active-active pairs are
        not constrained.
        """
        if self.n_couplers == 0:
            return None
        d = pairwise_distances(self.port_positions)
        m = self.n_active
        d[:m, :m] = np.inf
        np.fill_diagonal(d, np.inf)
        i, j = np.unravel_index(np.argmin(d), d.shape)
        if d[i, j] < self.d_min - tol:
            i, j = sorted((int(i), int(j)))
            return i, j, float(d[i, j])
        return None

    def is_feasible(self, tol=FEASIBILITY_TOL):
        return not self.violations(tol)

    def check_feasible(self):
        """Raise SpacingError naming the first offending pair or coupler."""
        problems = self.violations()
        if problems:
            worst = self.closest_violating_pair()
            raise SpacingError("infeasible layout: " + "; ".join(problems),
                               pair=None if worst is None else worst[:2])

    def same_as(self, other):
        return (
            np.array_equal(self.active_positions, other.active_positions)
            and np.array_equal(self.coupler_positions, other.coupler_positions)
            and np.array_equal(self.coupler_owner, other.coupler_owner)
            and self.region_half_width == other.region_half_width
            and self.d_min == other.d_min
        )


def pairwise_distances(points):
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def fixed_coupler_offsets(n, spacing):
    """In-line offsets ``+s, -s, +2s, -2s, ...`` for ``n`` couplers."""
    return np.array([(1 if j % 2 == 0 else -1) * spacing * (j // 2 + 1) for j in range(n)])


def ula_layout(M, N, wavelength, rca_spacing=None, region_half_width=None,
               d_min=None, coupler_spacing=None):
    """Uniform linear RCA array along x with couplers on the array line.

    Each RCA holds ``N`` couplers at uniform ``coupler_spacing`` (default
    0.4 wavelength) on both sides of its active antenna, which is the
    fixed-coupler reference geometry.
    """
    if M < 1 or N < 0:
        raise DomainError("need M >= 1 and N >= 0")
    rca_spacing = 2.0 * wavelength if rca_spacing is None else rca_spacing
    region_half_width = wavelength if region_half_width is None else region_half_width
    d_min = 0.25 * wavelength if d_min is None else d_min
    coupler_spacing = 0.4 * wavelength if coupler_spacing is None else coupler_spacing
    xs = (np.arange(M) - (M - 1) / 2.0) * rca_spacing
    active = np.column_stack([xs, np.zeros(M), np.zeros(M)])
    offsets = fixed_coupler_offsets(N, coupler_spacing)
    couplers = np.array([[x + o, 0.0, 0.0] for x in xs for o in offsets]).reshape(-1, 3)
    owner = np.repeat(np.arange(M), N)
    return ArrayLayout(active, couplers, owner, region_half_width, d_min)


def random_feasible_xy(layout, rng, max_tries=10000):
    """Draw coupler positions uniformly in their regions, rejecting infeasible draws."""
    lo = layout.owner_xy - layout.region_half_width
    for _ in range(max_tries):
        xy = lo + 2.0 * layout.region_half_width * rng.random((layout.n_couplers, 2))
        if layout.with_coupler_xy(xy).closest_violating_pair() is None:
            return xy
    raise SpacingError("could not draw a feasible random layout")
