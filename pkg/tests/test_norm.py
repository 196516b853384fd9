import numpy as np
import pytest

from hinfland.errors import DomainError
from hinfland.lti import ClosedLoop, Controller, assemble_closed_loop
from hinfland.norm import (INF_FREQ, J, directional_derivative_fd, hamiltonian, hinf_gradient,
                           hinf_norm, hinf_norm_grid_oracle, level_crossings, sigma_gradient)
from hinfland.systems import random_stable_closed_loop, random_stabilized_pair


def test_example_norm(plant, k_simple):
    res = hinf_norm(assemble_closed_loop(plant, k_simple))
    assert res.gamma == pytest.approx(1.0, rel=1e-9)
    assert res.peak_omegas == (0.0,)
    lo, hi = res.bracket
    assert lo <= 1.0 <= hi


def test_static_gain():
    cl = ClosedLoop([[-1.0]], [[1.0]], [[0.0]], [[2.0]])
    res = hinf_norm(cl)
    assert res.gamma == 2.0
    assert res.peak_omegas == (INF_FREQ,)
    assert hinf_norm_grid_oracle(cl, 1000) == 2.0


def test_oracle_example(plant, k_simple):
    assert hinf_norm_grid_oracle(assemble_closed_loop(plant, k_simple)) == pytest.approx(1.0, abs=1e-8)


def test_unstable_and_bad_tolerance(plant):
    cl = assemble_closed_loop(plant, Controller([[0.0, 1.0], [0.0, 2.0]], 1, 1))
    with pytest.raises(DomainError):
        hinf_norm(cl)
    with pytest.raises(ValueError):
        hinf_norm(ClosedLoop([[-1.0]], [[1.0]], [[1.0]], [[0.0]]), rel_tol=0.1)


def test_level_test_brackets_norm(rng):
    for _ in range(30):
        cl = random_stable_closed_loop(rng)
        g = hinf_norm_grid_oracle(cl, 20_000)
        assert level_crossings(cl, 1.01 * g).size == 0
        if g > 0 and hamiltonian(cl, 0.99 * g) is not None:
            assert level_crossings(cl, 0.99 * g).size > 0


def test_level_below_feedthrough_reports_above():
    cl = ClosedLoop([[-1.0]], [[1.0]], [[1.0]], [[2.0]])
    assert hamiltonian(cl, 1.5) is None
    assert level_crossings(cl, 1.5) is None


def test_invariants_random(rng):
    for _ in range(20):
        cl = random_stable_closed_loop(rng)
        res = hinf_norm(cl, 1e-9)
        om = np.concatenate([[0.0], np.logspace(-3, 3, 300)])
        s = [np.linalg.norm(np.asarray(cl.Ccl @ np.linalg.solve(1j * w * np.eye(cl.n) - cl.Acl, cl.Bcl)
                                       + cl.Dcl), 2) for w in om]
        assert max(s) <= res.gamma * (1 + 1e-9)
        assert list(res.peak_omegas) == sorted(res.peak_omegas) or INF_FREQ in res.peak_omegas
        # doubling the output doubles the norm
        assert hinf_norm(cl.scaled_output(2.0)).gamma == pytest.approx(2 * res.gamma, rel=1e-8)


def test_gradient_matches_finite_differences(plant):
    k = Controller([[-0.5, 1.0], [0.3, -1.2]], 1, 1)
    G = hinf_gradient(plant, k)
    assert G is not None
    h = 1e-6
    fd = np.zeros_like(G)
    for idx in np.ndindex(G.shape):
        E = np.zeros_like(G)
        E[idx] = h
        fd[idx] = (J(plant, k + E, 1e-12) - J(plant, k + (-E), 1e-12)) / (2 * h)
    np.testing.assert_allclose(G, fd, atol=1e-4)


def test_gradient_directional_consistency(plant, rng):
    k = Controller([[-0.5, 1.0], [0.3, -1.2]], 1, 1)
    G = hinf_gradient(plant, k)
    for _ in range(10):
        V = rng.standard_normal(G.shape)
        est = directional_derivative_fd(plant, k, V)
        assert est.value == pytest.approx(np.sum(G * V), abs=1e-4)


def test_gradient_nonsmooth_marker(plant):
    # static gain 1 - sqrt(3): peaks at 0 and infinity are both active
    k = Controller([[1 - np.sqrt(3), 0.0], [0.0, -1.0]], 1, 1)
    res = hinf_norm(assemble_closed_loop(plant, k))
    assert len(res.peak_omegas) == 2
    assert hinf_gradient(plant, k, res) is None


def test_gradient_conjugate_peak(rng):
    p, k = random_stabilized_pair(rng, nx=2)
    res = hinf_norm(assemble_closed_loop(p, k))
    w = res.peak_omegas[0]
    if np.isfinite(w):
        G1, _ = sigma_gradient(p, k, w)
        G2, _ = sigma_gradient(p, k, -w)
        np.testing.assert_allclose(G1, G2, atol=1e-10)


def test_directional_derivative_basics(plant):
    k = Controller([[-0.5, 1.0], [0.3, -1.2]], 1, 1)
    V = np.array([[0.3, -0.2], [0.1, 0.4]])
    assert directional_derivative_fd(plant, k, np.zeros((2, 2))).value == 0.0
    d1 = directional_derivative_fd(plant, k, V).value
    d2 = directional_derivative_fd(plant, k, 2 * V).value
    assert d2 == pytest.approx(2 * d1, rel=1e-6)


def test_directional_derivative_leaves_set(plant, k_simple):
    V = np.array([[0.0, 0.0], [0.0, 1.0]])  # pushes AK to 0 at t = 1
    with pytest.raises(DomainError, match="t=1"):
        directional_derivative_fd(plant, k_simple, V, steps=(1.0, 0.5))
