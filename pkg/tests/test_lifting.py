import numpy as np
import pytest

from hinfland.errors import DimensionError, DomainError
from hinfland.lifting import (CertifiedTriple, LiftedVars, assemble_M, certified_triple,
                              congruence_check, congruence_residuals, descent_curve,
                              descent_direction, in_F, membership, phi, psi)
from hinfland.lti import Controller
from hinfland.norm import J
from hinfland.systems import random_certified_triple, random_plant


def _random_vars(rng, plant, gamma=2.0):
    n, nu, ny = plant.nx, plant.nu, plant.ny
    X, Y = rng.standard_normal((2, n, n))
    return LiftedVars(X + X.T, Y + Y.T, rng.standard_normal((n, n)), rng.standard_normal((n, ny)),
                      rng.standard_normal((nu, n)), rng.standard_normal((nu, ny)), gamma)


def test_phi_hand_example(plant, k_simple):
    t = CertifiedTriple(k_simple, [[2.0, 1.0], [1.0, 2.0]], 3.0)
    lp = phi(t, plant)
    expected = dict(Xi=1.0, X=2 / 3, Y=2.0, M=-5 / 3, H=0.0, F=-1 / 3, G=0.0)
    for name, v in expected.items():
        assert getattr(lp, name)[0, 0] == pytest.approx(v, abs=1e-14), name
    assert lp.gamma == 3.0


def test_phi_rejects_degenerate(plant, k_simple):
    with pytest.raises(DomainError, match="P12"):
        phi(CertifiedTriple(k_simple, np.eye(2), 1.0), plant)
    with pytest.raises(DomainError, match="positive definite"):
        phi(CertifiedTriple(k_simple, -np.eye(2), 1.0), plant)


def test_triple_shape_checked(k_simple):
    with pytest.raises(DimensionError):
        CertifiedTriple(k_simple, np.eye(3), 1.0)


def test_assemble_M_example(plant):
    I = np.eye(1)
    Mz = assemble_M(I, I, 0 * I, np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), 3.0, plant)
    assert Mz.shape == (6, 6)
    assert Mz[0, 0] == -2.0
    np.testing.assert_array_equal(Mz[2:4, 2:4], -3 * np.eye(2))
    np.testing.assert_array_equal(Mz, Mz.T)


def test_assemble_M_affine(rng):
    p = random_plant(rng, nx=3, nw=2, nu=2, nz=2, ny=2)
    Z1, Z2 = _random_vars(rng, p, 1.5), _random_vars(rng, p, 4.0)
    a = 0.3
    lhs = assemble_M(*Z1.lerp(Z2, 1 - a).arrays(), a * 1.5 + (1 - a) * 4.0, p)
    rhs = a * assemble_M(*Z1.arrays(), 1.5, p) + (1 - a) * assemble_M(*Z2.arrays(), 4.0, p)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    diff = assemble_M(*Z1.arrays(), 1.0, p) - assemble_M(*Z1.arrays(), 3.0, p)
    np.testing.assert_array_equal(diff, 2.0 * np.diag([0.0] * 6 + [1.0] * 4))


def test_in_F(plant, rng):
    zero = LiftedVars(0, 0, 0, 0, 0, 0, 5.0)
    assert not in_F(zero, plant)
    for _ in range(3):
        p, t1 = random_certified_triple(rng)
        t2 = certified_triple(p, t1.k, gamma=1.5 * t1.gamma, center=True)
        Z1, Z2 = phi(t1, p).Z, phi(t2, p).Z
        assert in_F(Z1, p) and in_F(Z2, p)
        assert in_F(Z1.lerp(Z2, 0.5), p)


def test_roundtrip_and_membership(rng):
    for _ in range(5):
        p, t = random_certified_triple(rng)
        lp = phi(t, p)
        np.testing.assert_array_equal(lp.G, t.k.DK)
        back = psi(lp.Xi, lp.Z, p)
        scale = 1 + max(np.linalg.norm(t.k.K, 2), np.linalg.norm(t.P, 2))
        assert np.abs(back.k.K - t.k.K).max() <= 1e-8 * scale
        assert np.abs(back.P - t.P).max() <= 1e-8 * scale
        assert back.gamma == t.gamma
        assert membership(back, p)["ok"]


def test_psi_structure(rng):
    p, t = random_certified_triple(rng, nx=2)
    lp = phi(t, p)
    xi = rng.standard_normal((2, 2)) + 2 * np.eye(2)  # any invertible Xi
    out = psi(xi, lp.Z, p)
    np.testing.assert_array_equal(out.P12, xi)
    assert np.linalg.eigvalsh(out.P)[0] > 0
    assert membership(out, p)["ok"]


def test_psi_rejects_outside(plant):
    Z = LiftedVars(1.0, 0.5, 0, 0, 0, 0, 1.0)  # Y - X^-1 < 0
    with pytest.raises(DomainError, match="Y - X"):
        psi(np.eye(1), Z, plant)


def test_congruence(rng):
    for _ in range(5):
        p, t = random_certified_triple(rng)
        r = congruence_residuals(t, p)
        assert set(r) == {"PT", "TPT", "TPAT", "TPB", "CT", "M", "scale"}
        assert congruence_check(t, p) <= 1e-10 * r["scale"]


@pytest.fixture
def start(plant):
    k = Controller([[-0.5, 1.0], [0.3, -1.2]], 1, 1)
    return certified_triple(plant, k)


def test_descent_curve_ends(plant, start, better_triple):
    t0 = descent_curve(start, better_triple, plant, 0.0)
    np.testing.assert_allclose(t0.k.K, start.k.K, atol=1e-9)
    t1 = descent_curve(start, better_triple, plant, 1.0)
    assert t1.gamma == pytest.approx(better_triple.gamma, rel=1e-14)
    assert J(plant, t1.k) <= better_triple.gamma * (1 + 1e-6)
    with pytest.raises(ValueError):
        descent_curve(start, better_triple, plant, 1.5)


def test_descent_curve_level_linear(plant, start, better_triple):
    for s in (0.25, 0.5, 0.75):
        ts = descent_curve(start, better_triple, plant, s)
        assert ts.gamma == pytest.approx((1 - s) * start.gamma + s * better_triple.gamma, rel=1e-14)
        assert membership(ts, plant)["ok"]


def test_descent_direction(plant, start, better_triple):
    V = descent_direction(start, better_triple, plant)
    k = start.k
    for f in (1e-4, 1e-3):
        tau = f * np.linalg.norm(k.K) / np.linalg.norm(V)
        assert J(plant, k + tau * V) < J(plant, k)


def test_descent_order_enforced(plant, start, better_triple):
    with pytest.raises(DomainError):
        descent_direction(better_triple, start, plant)
    with pytest.raises(DomainError):
        descent_curve(better_triple, start, plant, 0.5)


def test_descent_curve_smooth(plant, start, better_triple):
    s = np.linspace(0.0, 0.2, 9)
    K = np.array([descent_curve(start, better_triple, plant, x).k.K for x in s])
    second = np.abs(np.diff(K, 2, axis=0)).max()
    first = np.abs(np.diff(K, 1, axis=0)).max()
    assert second < 0.1 * first
