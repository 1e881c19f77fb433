"""Induced-EMF impedance model of parallel side-by-side dipoles.

Impedances are referred to the current maximum of a sinusoidal current
distribution. The side-by-side mutual formula is exact for half-wave
dipoles and a standard approximation for other lengths.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import sici as _fast_sici

from .errors import ConditioningError, DomainError, SpacingError
from .special import EULER_GAMMA, sici

ETA0 = 376.73
EM_FLOOR = 0.05          # model-validity floor on spacing, in wavelengths
COND_LIMIT = 1e12


@dataclass(frozen=True)
class DipoleSpec:
    """Thin straight-wire dipole. ``radius`` defaults to 1e-4 wavelength."""

    wavelength: float
    length: float = None
    radius: float = None

    def __post_init__(self):
        if not (self.wavelength > 0 and np.isfinite(self.wavelength)):
            raise DomainError("wavelength must be positive")
        if self.length is None:
            object.__setattr__(self, "length", 0.5 * self.wavelength)
        if self.radius is None:
            object.__setattr__(self, "radius", 1e-4 * self.wavelength)
        if not self.length > 0:
            raise DomainError("dipole length must be positive")
        if not 0 < self.radius < self.length:
            raise DomainError("wire radius must be positive and below the length")

    @property
    def k(self):
        return 2.0 * np.pi / self.wavelength

    @property
    def d_min_em(self):
        return EM_FLOOR * self.wavelength


@dataclass(frozen=True, eq=False)
class ImpedanceSet:
    """Blocks of the (M + C)-port impedance matrix, in ohms."""

    Zaa: np.ndarray
    Zac: np.ndarray
    Zcc: np.ndarray

    @property
    def full(self):
        return np.block([[self.Zaa, self.Zac], [self.Zac.T, self.Zcc]])


@dataclass(frozen=True, eq=False)
class LoadConfig:
    """Per-coupler load impedances and the sign of the induced-current solve."""

    loads: np.ndarray
    sign_convention: int = -1

    def __post_init__(self):
        loads = np.array(self.loads, dtype=complex).reshape(-1)
        if self.sign_convention not in (1, -1):
            raise DomainError("sign_convention must be +1 or -1")
        loads.setflags(write=False)
        object.__setattr__(self, "loads", loads)

    @classmethod
    def short(cls, n, sign_convention=-1):
        return cls(np.zeros(n, dtype=complex), sign_convention)

    @classmethod
    def open(cls, n, magnitude=1e9, sign_convention=-1):
        return cls(np.full(n, complex(magnitude)), sign_convention)

    @classmethod
    def reactive(cls, reactances, sign_convention=-1):
        return cls(1j * np.asarray(reactances, dtype=float), sign_convention)

    def __len__(self):
        return len(self.loads)


@dataclass(frozen=True, eq=False)
class MechanicalWeights:
    """Coupler currents per unit active current, shape (C, M)."""

    W: np.ndarray


@lru_cache(maxsize=64)
def self_impedance(spec):
    """Induced-EMF self impedance of a dipole, in ohms."""
    k, l, a = spec.k, spec.length, spec.radius
    kl = k * l
    (si1, si2, _), (ci1, ci2, cia) = sici(np.array([kl, 2 * kl, 2 * k * a * a / l]))
    s, c = np.sin(kl), np.cos(kl)
    R = ETA0 / (2 * np.pi) * (
        EULER_GAMMA + np.log(kl) - ci1
        + 0.5 * s * (si2 - 2 * si1)
        + 0.5 * c * (EULER_GAMMA + np.log(kl / 2) + ci2 - 2 * ci1)
    )
    X = ETA0 / (4 * np.pi) * (2 * si1 + c * (2 * si1 - si2) - s * (2 * ci1 - ci2 - cia))
    return complex(R, X)


def _mutual_kernel(d, spec):
    """Side-by-side mutual impedance for an array of spacings (unchecked)."""
    k, l = spec.k, spec.length
    root = np.sqrt(d * d + l * l)
    u = np.stack([k * d, k * (root + l), k * (root - l)])
    si, ci = _fast_sici(u)
    scale = ETA0 / (4 * np.pi)
    return scale * ((2 * ci[0] - ci[1] - ci[2]) - 1j * (2 * si[0] - si[1] - si[2]))


def mutual_impedance_side_by_side(d, spec):
    """Mutual impedance of two parallel dipoles with centers ``d`` meters apart."""
    d = float(d)
    if not np.isfinite(d) or d < spec.d_min_em:
        raise SpacingError(
            f"spacing {d:.6g} m is below the model floor {spec.d_min_em:.6g} m")
    return complex(_mutual_kernel(np.array(d), spec))


def impedance_matrix(points, spec):
    """Full port impedance matrix for port centers ``points`` of shape (..., P, 3).

    Leading axes are treated as a batch. Diagonals hold the self impedance.
    """
    points = np.asarray(points, dtype=float)
    P = points.shape[-2]
    diff = points[..., :, None, :] - points[..., None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    iu = np.triu_indices(P, 1)
    du = d[..., iu[0], iu[1]]
    if du.size and du.min() < spec.d_min_em:
        flat = np.argmin(du.reshape(-1, du.shape[-1]).min(axis=0))
        raise SpacingError(
            f"ports {iu[0][flat]} and {iu[1][flat]} closer than the model floor "
            f"{spec.d_min_em:.6g} m", pair=(int(iu[0][flat]), int(iu[1][flat])))
    Z = np.empty(points.shape[:-2] + (P, P), dtype=complex)
    zu = _mutual_kernel(du, spec)
    Z[..., iu[0], iu[1]] = zu
    Z[..., iu[1], iu[0]] = zu
    idx = np.arange(P)
    Z[..., idx, idx] = self_impedance(spec)
    return Z


def assemble_impedances(layout, spec):
    """Impedance blocks for every port of ``layout``, coupling across RCAs included."""
    layout.check_feasible()
    Z = impedance_matrix(layout.port_positions, spec)
    m = layout.n_active
    return ImpedanceSet(Z[:m, :m].copy(), Z[:m, m:].copy(), Z[m:, m:].copy())


def solve_weights(Zac, Zcc, loads, sign=-1):
    """Batched ``sign * (Zcc + diag(loads))^-1 Zac^T``.

    ``Zac`` is (..., M, C), ``Zcc`` is (..., C, C), ``loads`` broadcasts to
    (..., C). Returns (..., C, M).
    """
    A = Zcc + np.einsum("...i,ij->...ij", np.broadcast_to(loads, Zcc.shape[:-1]),
                        np.eye(Zcc.shape[-1]))
    cond = np.linalg.cond(A)
    if not np.all(np.isfinite(cond)) or np.any(cond > COND_LIMIT):
        raise ConditioningError(
            f"coupler system is ill-conditioned (condition number {np.max(cond):.3g})")
    return sign * np.linalg.solve(A, np.swapaxes(Zac, -1, -2))


def mechanical_weights(Z, loads):
    """Induced coupler currents per unit active current."""
    C = Z.Zcc.shape[0]
    if len(loads) != C:
        raise DomainError(f"expected {C} loads, got {len(loads)}")
    if C == 0:
        return MechanicalWeights(np.zeros((0, Z.Zaa.shape[0]), dtype=complex))
    return MechanicalWeights(solve_weights(Z.Zac, Z.Zcc, loads.loads, loads.sign_convention))


def weight_residual(Z, loads, weights):
    """Relative residual of the coupler circuit equations."""
    A = Z.Zcc + np.diag(loads.loads)
    rhs = loads.sign_convention * Z.Zac.T
    return np.linalg.norm(A @ weights.W - rhs) / np.linalg.norm(rhs)
