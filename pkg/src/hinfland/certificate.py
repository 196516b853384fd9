"""Bounded-real certificates for closed loops.

A certificate is a pair ``(P, gamma)`` with ``P > 0`` and::

    N(K, P, gamma) = [[Acl'P + P Acl, P Bcl,  Ccl'],
                      [Bcl'P,        -gamma I, Dcl'],
                      [Ccl,           Dcl,    -gamma I]]  <= 0

which guarantees ``||T||_inf <= gamma``. Two constructions are provided: the
stabilizing solution of the bounded-real Riccati equation and, as a
fallback, an LMI feasibility search.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DimensionError
from .lmi import AffineLMI, svec_to_sym, sym_to_svec
from .lti import ClosedLoop, assemble_closed_loop, is_stable
from .norm import hinf_norm

__all__ = [
    "Certificate",
    "Failure",
    "EIG_FLOOR",
    "bounded_real_matrix",
    "assemble_N",
    "default_lmi_tol",
    "check_certificate",
    "certify_riccati",
    "certify_lmi",
    "certify",
    "certify_floor",
    "is_nondegenerate",
    "riccati_residual",
]

#: eigenvalue floor for P in the non-degeneracy test
EIG_FLOOR = 1e-4


@dataclass(frozen=True)
class Certificate:
    P: np.ndarray
    gamma: float
    lambda_min_P: float
    lmi_max_eig: float
    p12_sigma_min: float
    lmi_tol: float
    method: str = "given"

    def __bool__(self):
        return True

    def as_dict(self):
        return {
            "gamma": self.gamma,
            "P": self.P.tolist(),
            "lambda_min_P": self.lambda_min_P,
            "lmi_max_eig": self.lmi_max_eig,
            "p12_sigma_min": self.p12_sigma_min,
            "method": self.method,
        }


@dataclass(frozen=True)
class Failure:
    """A certificate search that did not succeed; falsy."""

    cause: str
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return False


def _closed_loop(plant, k):
    if isinstance(plant, ClosedLoop):
        if k is not None:
            raise TypeError("pass k=None together with a ClosedLoop")
        return plant
    return assemble_closed_loop(plant, k)


def bounded_real_matrix(cl, P, gamma):
    """``N`` for a closed-loop realization; symmetric by construction."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    n = cl.n
    if P.shape != (n, n):
        raise DimensionError(f"P has shape {P.shape}, expected {(n, n)}", block="P")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    A, B, C, D = cl.Acl, cl.Bcl, cl.Ccl, cl.Dcl
    nw, nz = D.shape[1], D.shape[0]
    PA = P @ A
    PB = P @ B
    top = PA.T + PA
    return np.block([
        [top, PB, C.T],
        [PB.T, -gamma * np.eye(nw), D.T],
        [C, D, -gamma * np.eye(nz)],
    ])


def assemble_N(plant, k, P, gamma):
    """``N(K, P, gamma)``; ``plant`` may also be a ``ClosedLoop`` with ``k=None``."""
    return bounded_real_matrix(_closed_loop(plant, k), P, gamma)


def default_lmi_tol(N):
    return 1e-8 * (1.0 + np.linalg.norm(N, 2))


def _p12_sigma_min(P):
    n = P.shape[0] // 2
    if n == 0 or 2 * n != P.shape[0]:
        return float("nan")
    return float(linalg.svdvals(P[:n, n:])[-1])


def check_certificate(plant, k, P, gamma, lmi_tol=None, method="given"):
    """Validate ``P`` as a non-strict bounded-real certificate at ``gamma``.

    Returns a :class:`Certificate` when ``lambda_min(P) > 0`` and
    ``lambda_max(N) <= lmi_tol`` (default ``1e-8 (1 + ||N||)``), otherwise a
    :class:`Failure` with the same diagnostics.
    """
    cl = _closed_loop(plant, k)
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape != (cl.n, cl.n):
        raise DimensionError(f"P has shape {P.shape}, expected {(cl.n, cl.n)}", block="P")
    asym = np.abs(P - P.T).max()
    if asym > 1e-12 * max(1.0, np.abs(P).max()):
        return Failure("P is not symmetric", {"asymmetry": float(asym)})
    P = 0.5 * (P + P.T)
    N = bounded_real_matrix(cl, P, gamma)
    tol = default_lmi_tol(N) if lmi_tol is None else float(lmi_tol)
    lam_p = float(linalg.eigvalsh(P)[0]) if cl.n else np.inf
    lam_n = float(linalg.eigvalsh(N)[-1])
    diag = {
        "lambda_min_P": lam_p,
        "lmi_max_eig": lam_n,
        "p12_sigma_min": _p12_sigma_min(P),
        "lmi_tol": tol,
    }
    if not lam_p > 0:
        return Failure("P is not positive definite", diag)
    if lam_n > tol:
        return Failure("LMI violated", diag)
    return Certificate(P, float(gamma), lam_p, lam_n, diag["p12_sigma_min"], tol, method)


def _riccati_data(cl, gamma):
    A, B, C, D = cl.Acl, cl.Bcl, cl.Ccl, cl.Dcl
    R = gamma ** 2 * np.eye(D.shape[1]) - D.T @ D
    return A, B, C, D, R


def riccati_residual(cl, gamma, Q):
    """Residual of ``A'Q + QA + (QB + C'D) R^{-1} (QB + C'D)' + C'C`` with
    ``R = gamma^2 I - D'D``."""
    A, B, C, D, R = _riccati_data(cl, gamma)
    S = Q @ B + C.T @ D
    return A.T @ Q + Q @ A + S @ linalg.solve(R, S.T, assume_a="pos") + C.T @ C


def certify_riccati(plant, k, gamma, slack=0.0, lmi_tol=None, imag_tol=1e-10):
    """Certificate from the stabilizing solution of the bounded-real Riccati equation.

    The equation is solved at level ``g = gamma / (1 - slack)`` through the
    stable invariant subspace of its Hamiltonian (ordered real Schur form);
    ``P = Q / g`` is then validated with :func:`check_certificate`. Returns a
    :class:`Failure` when the equation is ill-posed (singular ``g^2 I - D'D``
    or Hamiltonian eigenvalues on the imaginary axis), the subspace basis is
    rank-deficient, or ``Q`` is not positive definite.
    """
    cl = _closed_loop(plant, k)
    if not 0 <= slack < 1:
        raise ValueError("slack must lie in [0, 1)")
    g = gamma / (1.0 - slack)
    A, B, C, D, R = _riccati_data(cl, g)
    n = cl.n
    try:
        Rc = linalg.cho_factor(R)
    except linalg.LinAlgError:
        return Failure("ill-posed: gamma^2 I - D'D is not positive definite")
    if np.min(np.diag(Rc[0])) ** 2 <= 1e-13 * g ** 2:
        return Failure("ill-posed: gamma^2 I - D'D is nearly singular")
    RinvDtC = linalg.cho_solve(Rc, D.T @ C)
    Ah = A + B @ RinvDtC
    H = np.block([
        [Ah, B @ linalg.cho_solve(Rc, B.T)],
        [-(C.T @ C + C.T @ D @ RinvDtC), -Ah.T],
    ])
    try:
        T, Z, sdim = linalg.schur(H, output="real", sort="lhp")
    except linalg.LinAlgError:
        # reordering failed: eigenvalues too close to the imaginary axis
        return Failure("ill-posed: Hamiltonian has eigenvalues on the imaginary axis")
    ev = linalg.eigvals(T)
    hscale = max(1.0, np.linalg.norm(H, 1))
    if np.min(np.abs(ev.real)) <= imag_tol * hscale or sdim != n:
        return Failure("ill-posed: Hamiltonian has eigenvalues on the imaginary axis",
                       {"min_abs_real": float(np.min(np.abs(ev.real))), "sdim": int(sdim)})
    U1, U2 = Z[:n, :n], Z[n:, :n]
    s = linalg.svdvals(U1)
    if s[-1] <= 1e-12 * s[0]:
        return Failure("stable subspace basis is rank deficient", {"cond_U1": float(s[0] / s[-1])})
    Q = linalg.solve(U1.T, U2.T).T
    Q = 0.5 * (Q + Q.T)
    lam_q = float(linalg.eigvalsh(Q)[0])
    if lam_q <= 0:
        return Failure("Riccati solution is not positive definite", {"lambda_min_Q": lam_q})
    cert = check_certificate(cl, None, Q / g, g, lmi_tol, method="riccati")
    if not cert:
        return Failure(f"Riccati solution rejected: {cert.cause}", cert.details)
    return cert


def _lmi_problem(cl, gamma, mu):
    n = cl.n
    npar = n * (n + 1) // 2

    def blocks(theta):
        P = svec_to_sym(theta, n)
        return [P, -bounded_real_matrix(cl, P, gamma)]

    return AffineLMI(blocks, npar, [mu, 0.0])


def certify_lmi(plant, k, gamma, max_iter=None, lmi_tol=None, mu=1e-6, P0=None, method="conic",
                center=False, margin_cap=1.0):
    """Certificate from an LMI feasibility search.

    Looks for symmetric ``P >= mu I`` with ``N(K, P, gamma) <= lmi_tol I``;
    the default ``lmi_tol`` is ``1e-8 (1 + ||N(K, 0, gamma)||)``. ``method``
    is ``"conic"`` (SDP solver, default budget 200 iterations),
    ``"barrier"`` (phase-I interior point, 500 Newton steps) or
    ``"projections"`` (alternating projections, 50 000 sweeps). The search starts from ``P0`` or, by default, from the
    solution of ``Acl'P + P Acl + Ccl'Ccl / gamma + I = 0``. With ``center``
    (conic method only) the returned ``P`` maximizes the common eigenvalue
    margin of both blocks, up to ``margin_cap``, instead of being the first
    feasible point; this gives well-conditioned certificates when ``gamma``
    has slack.
    """
    cl = _closed_loop(plant, k)
    n = cl.n
    if not is_stable(cl.Acl):
        return Failure("closed loop is not stable")
    if P0 is None:
        P0 = linalg.solve_continuous_lyapunov(cl.Acl.T, -(cl.Ccl.T @ cl.Ccl / gamma + np.eye(n)))
    if lmi_tol is None:
        lmi_tol = 1e-8 * (1.0 + np.linalg.norm(bounded_real_matrix(cl, np.zeros((n, n)), gamma), 2))
    if max_iter is None:
        max_iter = {"conic": 200, "barrier": 500}.get(method, 50_000)
    prob = _lmi_problem(cl, gamma, mu)
    kw = {"center": True, "margin_cap": margin_cap} if center else {}
    res = prob.solve(sym_to_svec(P0), tol=lmi_tol, method=method, max_iter=max_iter, **kw)
    if not res.feasible:
        return Failure(f"LMI search {res.status}",
                       {"iterations": res.iterations, "violation": res.violation, "gap": res.gap})
    cert = check_certificate(cl, None, svec_to_sym(res.theta, n), gamma, lmi_tol, method="lmi")
    if not cert:
        return Failure(f"LMI iterate rejected: {cert.cause}", cert.details)
    return cert


def certify(plant, k, gamma, slack=0.0, lmi_tol=None, max_iter=None):
    """Riccati construction with LMI fallback at level ``gamma / (1 - slack)``."""
    cert = certify_riccati(plant, k, gamma, slack, lmi_tol)
    if cert:
        return cert
    return certify_lmi(plant, k, gamma / (1.0 - slack), max_iter, lmi_tol)


def certify_floor(plant, k, gamma, eig_floor=EIG_FLOOR, p12_floor=0.0, max_iter=None):
    """Certificate at ``gamma`` meeting ``lambda_min(P) >= eig_floor``.

    Tries the Riccati construction first; if it fails or misses the floors,
    runs the LMI search with ``P >= eig_floor I``. Returns ``(ok, cert)``
    where ``cert`` is the best certificate found (or ``None``).
    """
    cl = _closed_loop(plant, k)

    def passes(c):
        return bool(c) and c.lambda_min_P >= eig_floor and c.p12_sigma_min >= p12_floor

    cert = certify_riccati(cl, None, gamma)
    if passes(cert):
        return True, cert
    # the Riccati solution is the smallest certificate; look for one above the floor
    alt = certify_lmi(cl, None, gamma, max_iter, mu=eig_floor)
    if passes(alt):
        return True, alt
    if cert:
        return False, cert
    return False, alt or None


def is_nondegenerate(plant, k, rel_tol=1e-9, p12_floor=0.0, eig_floor=EIG_FLOOR, max_iter=None):
    """Membership test for non-degenerate stabilizing controllers.

    Computes ``gamma = J(K)`` to ``rel_tol``, certifies at
    ``gamma / (1 - rel_tol)`` with :func:`certify_floor` and accepts when
    ``lambda_min(P) >= eig_floor`` and ``sigma_min(P12) >= p12_floor``.
    Returns ``(flag, certificate)``; the certificate is ``None`` if none was
    found.
    """
    cl = _closed_loop(plant, k)
    gamma = hinf_norm(cl, rel_tol).gamma
    return certify_floor(cl, None, gamma / (1.0 - rel_tol), eig_floor, p12_floor, max_iter)
