import numpy as np
import pytest

from hinfland.certificate import (EIG_FLOOR, assemble_N, bounded_real_matrix, certify,
                                  certify_floor, certify_lmi, certify_riccati, check_certificate,
                                  is_nondegenerate, riccati_residual)
from hinfland.errors import DimensionError
from hinfland.lti import ClosedLoop, Controller, assemble_closed_loop
from hinfland.norm import hinf_norm
from hinfland.systems import random_stabilized_pair

SCALAR = ClosedLoop([[-1.0]], [[1.0]], [[1.0]], [[0.0]])


def test_scalar_N():
    N = bounded_real_matrix(SCALAR, [[1.0]], 2.0)
    np.testing.assert_array_equal(N, [[-2, 1, 1], [1, -2, 0], [1, 0, -2]])


def test_N_with_zero_P(plant, k_simple):
    cl = assemble_closed_loop(plant, k_simple)
    N = assemble_N(plant, k_simple, np.zeros((2, 2)), 1.0)
    n, nw = 2, 2
    assert np.all(N[:n, :n + nw] == 0)
    np.testing.assert_array_equal(N[:n, n + nw:], cl.Ccl.T)
    np.testing.assert_array_equal(N[n:n + nw, n:n + nw], -np.eye(nw))
    np.testing.assert_array_equal(N[n + nw:, n + nw:], -np.eye(2))
    np.testing.assert_array_equal(N, N.T)


def test_N_dimension_error():
    with pytest.raises(DimensionError):
        bounded_real_matrix(SCALAR, np.eye(2), 1.0)


def test_check_scalar_example():
    # -N has leading minors 2, 3, 4
    N = bounded_real_matrix(SCALAR, [[1.0]], 2.0)
    assert [round(np.linalg.det(-N[:i, :i]), 12) for i in (1, 2, 3)] == [2, 3, 4]
    cert = check_certificate(SCALAR, None, [[1.0]], 2.0)
    assert cert and cert.lambda_min_P == 1.0
    assert not check_certificate(SCALAR, None, [[-1.0]], 2.0)
    assert "positive definite" in check_certificate(SCALAR, None, [[-1.0]], 2.0).cause


def test_check_rejects_below_norm(rng):
    for _ in range(10):
        p, k = random_stabilized_pair(rng)
        cl = assemble_closed_loop(p, k)
        g = hinf_norm(cl).gamma
        for _ in range(5):
            R = rng.standard_normal((cl.n, cl.n))
            assert not check_certificate(cl, None, R @ R.T + 1e-3 * np.eye(cl.n), 0.9 * g)


def test_check_rejects_asymmetric():
    assert not check_certificate(ClosedLoop(-np.eye(2), np.eye(2), np.eye(2), np.zeros((2, 2))),
                                 None, [[1.0, 0.5], [0.0, 1.0]], 5.0)


def test_riccati_scalar():
    cert = certify_riccati(SCALAR, None, 2.0)
    assert cert.method == "riccati"
    assert cert.P[0, 0] == pytest.approx((4 - 2 * np.sqrt(3)) / 2, rel=1e-12)
    assert abs(riccati_residual(SCALAR, 2.0, 2 * cert.P)[0, 0]) < 1e-14


def test_riccati_below_norm():
    f = certify_riccati(SCALAR, None, 0.5)
    assert not f and "imaginary axis" in f.cause


def test_riccati_singular_feedthrough():
    cl = ClosedLoop([[-1.0]], [[1.0]], [[1.0]], [[2.0]])
    assert "ill-posed" in certify_riccati(cl, None, 2.0).cause


def test_lmi_scalar():
    assert certify_lmi(SCALAR, None, 2.0)
    f = certify_lmi(SCALAR, None, 0.5)
    assert not f and "infeasible" in f.cause


def test_lmi_unstable():
    assert not certify_lmi(ClosedLoop([[1.0]], [[1.0]], [[1.0]], [[0.0]]), None, 2.0)


def test_certify_falls_back_to_lmi():
    # peak at infinity equal to gamma: Riccati is ill-posed, the LMI is not
    cl = ClosedLoop([[-1.0]], [[1.0]], [[-0.1]], [[1.0]])
    assert hinf_norm(cl).gamma == pytest.approx(1.0)
    assert "ill-posed" in certify_riccati(cl, None, 1.0).cause
    cert = certify(cl, None, 1.0)
    assert cert and cert.method == "lmi"


def test_certify_floor_meets_floor(plant, k_simple):
    ok, cert = certify_floor(plant, k_simple, 1.0 / (1 - 1e-9))
    assert ok and cert.lambda_min_P >= EIG_FLOOR


def test_nondegenerate(plant):
    for k in ([[-0.5, 1.0], [0.3, -1.2]], [[0.2, 1.0], [-1.0, -1.0]]):
        ok, cert = is_nondegenerate(plant, Controller(k, 1, 1))
        assert ok and abs(cert.P[0, 1]) > 0
    ok, cert = is_nondegenerate(plant, Controller([[-0.5, 1.0], [0.3, -1.2]], 1, 1), p12_floor=1e6)
    assert not ok


def test_certificate_transport_under_similarity(rng):
    # blkdiag(I, S)-congruence of P certifies the transformed controller
    from scipy.linalg import block_diag

    for _ in range(5):
        p, k = random_stabilized_pair(rng)
        g = 1.05 * hinf_norm(assemble_closed_loop(p, k)).gamma
        cert = certify(p, k, g)
        S = rng.standard_normal((p.nx, p.nx)) + 3 * np.eye(p.nx)
        Tinv = block_diag(np.eye(p.nx), np.linalg.inv(S))
        assert check_certificate(p, k.similarity(S), Tinv.T @ cert.P @ Tinv, g)
