import numpy as np
import pytest

from rcasim import (DipoleSpec, LoadConfig, assemble_impedances, mechanical_weights,
                    mutual_impedance_side_by_side, self_impedance, ula_layout)
from rcasim.em import impedance_matrix, weight_residual
from rcasim.errors import ConditioningError, DomainError, SpacingError
from rcasim.layout import ArrayLayout, random_feasible_xy

from oracles import induced_emf_quad

LAM = 0.04
# frozen from oracles.induced_emf_quad (direct near-field quadrature)
Z_HALF_05 = complex(-12.523397025421133, -29.907911033128254)
Z_HALF_10 = complex(4.008852354717898, 17.729740529109687)
Z_QUARTER_SELF = complex(6.715589364084889, -361.47350503096465)


def test_self_impedance_half_wave(spec):
    z = self_impedance(spec)
    assert abs(z.real - 73.13) < 0.1 and abs(z.imag - 42.54) < 0.1


def test_self_impedance_quarter_wave():
    z = self_impedance(DipoleSpec(LAM, 0.25 * LAM))
    assert abs(z - Z_QUARTER_SELF) < 0.1


def test_self_impedance_deterministic(spec):
    assert self_impedance(DipoleSpec(LAM)) == self_impedance(spec)


@pytest.mark.parametrize("d, golden, oracle", [
    (0.5, complex(-12.53, -29.93), Z_HALF_05),
    (1.0, complex(4.01, 17.73), Z_HALF_10),
])
def test_mutual_golden(spec, d, golden, oracle):
    z = mutual_impedance_side_by_side(d * LAM, spec)
    assert abs(z.real - golden.real) < 0.1 and abs(z.imag - golden.imag) < 0.1
    assert abs(z - oracle) < 1e-6


@pytest.mark.parametrize("d", [0.07, 0.2, 0.33, 0.8, 1.7, 3.2])
def test_mutual_matches_quadrature(spec, d):
    assert abs(mutual_impedance_side_by_side(d * LAM, spec) - induced_emf_quad(d * LAM, 0.5 * LAM, LAM)) < 1e-6


def test_mutual_decay(spec):
    z05 = abs(mutual_impedance_side_by_side(0.5 * LAM, spec))
    z10 = abs(mutual_impedance_side_by_side(10 * LAM, spec))
    z100 = abs(mutual_impedance_side_by_side(100 * LAM, spec))
    assert z10 < z05 and z100 < 1.0


def test_mutual_below_model_floor(spec):
    with pytest.raises(SpacingError):
        mutual_impedance_side_by_side(0.01 * LAM, spec)


def test_reciprocity_both_paths(spec, rng):
    pts = np.zeros((5, 3))
    pts[:, :2] = rng.uniform(-2 * LAM, 2 * LAM, (5, 2))
    pts[:, 0] += np.arange(5) * LAM
    Z = impedance_matrix(pts, spec)
    assert np.array_equal(Z, Z.T)
    i, j = 1, 3
    d = np.linalg.norm(pts[i] - pts[j])
    assert Z[i, j] == pytest.approx(mutual_impedance_side_by_side(d, spec), abs=1e-12)


def test_assemble_single_active(spec):
    lay = ArrayLayout([[0, 0, 0]], np.zeros((0, 3)), [], LAM, 0.2 * LAM)
    Z = assemble_impedances(lay, spec)
    assert Z.Zaa.shape == (1, 1) and Z.Zaa[0, 0] == self_impedance(spec)
    assert Z.Zac.shape == (1, 0) and Z.Zcc.shape == (0, 0)


def test_assemble_two_couplers_composes_kernel(spec):
    lay = ula_layout(1, 2, LAM, d_min=0.2 * LAM, coupler_spacing=0.5 * LAM)
    Z = assemble_impedances(lay, spec)
    half = mutual_impedance_side_by_side(0.5 * LAM, spec)
    full = mutual_impedance_side_by_side(1.0 * LAM, spec)
    assert Z.Zcc[0, 1] == pytest.approx(full, abs=1e-12)
    assert np.allclose(Z.Zac, half, atol=1e-12)
    assert np.allclose(np.diag(Z.Zcc), self_impedance(spec))


def test_assemble_symmetry_and_diagonals(spec, canonical_layout):
    Z = assemble_impedances(canonical_layout, spec)
    for block in (Z.Zaa, Z.Zcc):
        assert np.allclose(block, block.T, rtol=1e-12, atol=0)
        assert np.all(np.diag(block) == self_impedance(spec))


def test_assemble_permutation_invariance(spec, canonical_layout):
    perm = np.array([3, 0, 5, 1, 4, 2])
    permuted = ArrayLayout(canonical_layout.active_positions,
                           canonical_layout.coupler_positions[perm],
                           canonical_layout.coupler_owner[perm],
                           canonical_layout.region_half_width, canonical_layout.d_min)
    a = assemble_impedances(canonical_layout, spec)
    b = assemble_impedances(permuted, spec)
    assert np.array_equal(b.Zcc, a.Zcc[np.ix_(perm, perm)])
    assert np.array_equal(b.Zac, a.Zac[:, perm])


def test_assemble_infeasible_names_pair(spec):
    lay = ArrayLayout([[0, 0, 0]], [[0.1 * LAM, 0, 0]], [0], LAM, 0.2 * LAM)
    with pytest.raises(SpacingError) as err:
        assemble_impedances(lay, spec)
    assert err.value.pair == (0, 1)


def test_weights_empty(spec):
    lay = ArrayLayout([[0, 0, 0]], np.zeros((0, 3)), [], LAM, 0.2 * LAM)
    W = mechanical_weights(assemble_impedances(lay, spec), LoadConfig.short(0))
    assert W.W.shape == (0, 1)


@pytest.mark.parametrize("sign", [-1, 1])
def test_weights_scalar_case(spec, sign):
    lay = ArrayLayout([[0, 0, 0]], [[0.3 * LAM, 0, 0]], [0], LAM, 0.2 * LAM)
    Z = assemble_impedances(lay, spec)
    x = 25.0 - 40.0j
    W = mechanical_weights(Z, LoadConfig([x], sign))
    zbar = mutual_impedance_side_by_side(0.3 * LAM, spec)
    assert W.W[0, 0] == pytest.approx(sign * zbar / (self_impedance(spec) + x), rel=1e-14)


def test_weights_dense_solver_oracle(spec):
    lay = ula_layout(1, 2, LAM, d_min=0.2 * LAM, coupler_spacing=0.5 * LAM)
    Z = assemble_impedances(lay, spec)
    W = mechanical_weights(Z, LoadConfig.short(2)).W
    oracle = -np.linalg.inv(Z.Zcc) @ Z.Zac.T
    assert np.allclose(W, oracle, rtol=1e-10, atol=0)


def test_weights_residual_random_layouts(spec, canonical_layout):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        lay = canonical_layout.with_coupler_xy(random_feasible_xy(canonical_layout, rng))
        Z = assemble_impedances(lay, spec)
        loads = LoadConfig.reactive(rng.uniform(-300, 300, 6))
        worst = max(worst, weight_residual(Z, loads, mechanical_weights(Z, loads)))
    assert worst < 1e-10


def test_weights_conditioning_error(spec):
    lay = ArrayLayout([[0, 0, 0]], [[0.3 * LAM, 0, 0]], [0], LAM, 0.2 * LAM)
    Z = assemble_impedances(lay, spec)
    with pytest.raises(ConditioningError):
        mechanical_weights(Z, LoadConfig([-self_impedance(spec)]))


def test_weights_load_count_mismatch(spec, canonical_layout):
    with pytest.raises(DomainError):
        mechanical_weights(assemble_impedances(canonical_layout, spec), LoadConfig.short(5))


def test_determinism(spec, canonical_layout):
    a = assemble_impedances(canonical_layout, spec)
    b = assemble_impedances(canonical_layout, spec)
    assert np.array_equal(a.full, b.full)
    wa = mechanical_weights(a, LoadConfig.short(6)).W
    wb = mechanical_weights(b, LoadConfig.short(6)).W
    assert np.array_equal(wa, wb)


def test_dipole_spec_validation():
    with pytest.raises(DomainError):
        DipoleSpec(-1.0)
    with pytest.raises(DomainError):
        DipoleSpec(LAM, 0.0)
    assert DipoleSpec(LAM).length == 0.5 * LAM
