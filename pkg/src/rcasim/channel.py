"""Multipath plane-wave channels seen through the coupling network."""

from dataclasses import dataclass

import numpy as np

from .em import LoadConfig, impedance_matrix, solve_weights
from .errors import DomainError

ELEVATION_LIMIT = np.pi / 3


@dataclass(frozen=True, eq=False)
class PathSet:
    """Far-field paths: arrival angles, complex gains and common amplitude ``gamma``."""

    azimuth: np.ndarray
    elevation: np.ndarray
    gain: np.ndarray
    large_scale_gain: float = 1.0

    def __post_init__(self):
        az = np.array(self.azimuth, dtype=float).reshape(-1)
        el = np.array(self.elevation, dtype=float).reshape(-1)
        g = np.array(self.gain, dtype=complex).reshape(-1)
        if not len(az) == len(el) == len(g):
            raise DomainError("azimuth, elevation and gain must have equal length")
        if self.large_scale_gain < 0:
            raise DomainError("large_scale_gain must be nonnegative")
        for name, arr in (("azimuth", az), ("elevation", el), ("gain", g)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "large_scale_gain", float(self.large_scale_gain))

    def __len__(self):
        return len(self.gain)

    @property
    def directions(self):
        """Unit propagation-direction vectors, shape (L, 3)."""
        ce = np.cos(self.elevation)
        return np.column_stack([ce * np.cos(self.azimuth), ce * np.sin(self.azimuth),
                                np.sin(self.elevation)])

    def scaled(self, factor):
        return PathSet(self.azimuth, self.elevation, self.gain * factor, self.large_scale_gain)


def sample_pathset(L, seed, large_scale_gain=1.0):
    """Draw ``L`` paths with uniform azimuth, elevation in +-pi/3 and CN(0, 1/L) gains."""
    if L < 1:
        raise DomainError(f"need at least one path, got L={L}")
    rng = np.random.default_rng(seed)
    return _sample_pathset(L, rng, large_scale_gain)


def _sample_pathset(L, rng, large_scale_gain=1.0):
    az = rng.uniform(0.0, 2.0 * np.pi, L)
    el = rng.uniform(-ELEVATION_LIMIT, ELEVATION_LIMIT, L)
    g = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2.0 * L)
    return PathSet(az, el, g, large_scale_gain)


def port_channels(pathset, positions, wavelength):
    """Channel amplitude at each point of ``positions`` (..., 3)."""
    if not wavelength > 0:
        raise DomainError("wavelength must be positive")
    k = 2.0 * np.pi / wavelength
    phase = np.asarray(positions, dtype=float) @ pathset.directions.T
    return pathset.large_scale_gain * (np.exp(1j * k * phase) @ pathset.gain)


def port_channel(pathset, position, wavelength):
    """Complex channel amplitude at a single port position."""
    return complex(port_channels(pathset, np.reshape(position, (1, 3)), wavelength)[0])


def effective_channel_batch(active_positions, coupler_positions, loads, pathset, spec):
    """Effective active-port channels for a batch of coupler placements.

    ``coupler_positions`` is (B, C, 3); ``loads`` a LoadConfig or a (B, C)
    complex array used with sign -1. Returns a (B, M) array.
    """
    coupler_positions = np.asarray(coupler_positions, dtype=float)
    B, C = coupler_positions.shape[:2]
    M = len(active_positions)
    act = np.broadcast_to(active_positions, (B, M, 3))
    points = np.concatenate([act, coupler_positions], axis=1)
    h = port_channels(pathset, points, spec.wavelength)
    if C == 0:
        return h
    if isinstance(loads, LoadConfig):
        sign, x = loads.sign_convention, loads.loads
    else:
        sign, x = -1, loads
    Z = impedance_matrix(points, spec)
    W = solve_weights(Z[:, :M, M:], Z[:, M:, M:], x, sign)
    return h[:, :M] + np.einsum("bc,bcm->bm", h[:, M:], W)


def effective_channel(layout, pathset, loads, spec):
    """Effective channel ``h_a + W^T h_c`` of every active port, shape (M,)."""
    layout.check_feasible()
    if len(loads) != layout.n_couplers:
        raise DomainError(f"expected {layout.n_couplers} loads, got {len(loads)}")
    return effective_channel_batch(layout.active_positions, layout.coupler_positions[None],
                                   loads, pathset, spec)[0]


def channel_gain(h_eff):
    """Squared norm of the effective channel along its last axis."""
    h = np.asarray(h_eff)
    return np.sum(h.real ** 2 + h.imag ** 2, axis=-1)


def snr_and_rate(h_eff, tx_power, noise_power):
    """SNR and rate under unit-norm maximum-ratio excitation of the active ports."""
    if not noise_power > 0:
        raise DomainError("noise power must be positive")
    if tx_power < 0:
        raise DomainError("transmit power must be nonnegative")
    snr = tx_power * float(channel_gain(h_eff)) / noise_power
    return {"snr": snr, "rate": float(np.log2(1.0 + snr))}


def mrt_weights(h_eff):
    """Unit-norm maximum-ratio excitation for the active ports."""
    h = np.asarray(h_eff)
    n = np.linalg.norm(h)
    return np.conj(h) / n if n > 0 else np.zeros_like(h)


def gain_map(layout, pathset, loads, spec, coupler_index, grid_resolution=101, chunk=2048):
    """Channel gain in dB with one coupler swept over its square region.

    Returns ``(x, y, gain_db)`` where ``x`` and ``y`` are the grid axes in
    meters and ``gain_db[i, j]`` is the gain with the coupler at
    ``(x[j], y[i])``; cells violating the minimum spacing are NaN.
    """
    if not 0 <= coupler_index < layout.n_couplers:
        raise DomainError(f"coupler_index {coupler_index} out of range")
    if grid_resolution < 2:
        raise DomainError("grid_resolution must be at least 2")
    cx, cy = layout.owner_xy[coupler_index]
    hw = layout.region_half_width
    x = np.linspace(cx - hw, cx + hw, grid_resolution)
    y = np.linspace(cy - hw, cy + hw, grid_resolution)
    gx, gy = np.meshgrid(x, y)
    cells = np.column_stack([gx.ravel(), gy.ravel()])
    mask = gain_map_mask(layout, coupler_index, cells)
    out = np.full(len(cells), np.nan)
    base = layout.coupler_positions
    idx = np.flatnonzero(~mask)
    for start in range(0, len(idx), chunk):
        sel = idx[start:start + chunk]
        pos = np.repeat(base[None], len(sel), axis=0)
        pos[:, coupler_index, :2] = cells[sel]
        h = effective_channel_batch(layout.active_positions, pos, loads, pathset, spec)
        out[sel] = 10.0 * np.log10(channel_gain(h))
    return x, y, out.reshape(grid_resolution, grid_resolution)


def gain_map_mask(layout, coupler_index, cells):
    """True where placing the coupler at ``cells`` breaks a region or spacing limit."""
    others = np.delete(layout.port_positions[:, :2], layout.n_active + coupler_index, axis=0)
    d = np.sqrt(((cells[:, None, :] - others[None, :, :]) ** 2).sum(-1))
    center = layout.owner_xy[coupler_index]
    outside = np.abs(cells - center).max(axis=1) > layout.region_half_width + 1e-12
    return outside | (d.min(axis=1) < layout.d_min) if len(others) else outside
