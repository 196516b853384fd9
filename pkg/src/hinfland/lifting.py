"""Convex lifting of certified controllers.

A certified triple ``(K, P, gamma)`` with ``P > 0``, invertible ``P12`` and
``N(K, P, gamma) <= 0`` is mapped by :func:`phi` to a lifted point
``(Xi, X, Y, M, H, F, G, gamma)``. The variables ``Z = (X, Y, M, H, F, G,
gamma)`` range over the convex set::

    F = {Z : [[X, I], [I, Y]] > 0,  Mcal(Z) <= 0}

where ``Mcal`` (:func:`assemble_M`) is affine. :func:`psi` is the inverse
map. Because ``F`` is convex, a straight segment between two lifted points
maps back to a smooth curve of certified controllers whose certified level
varies linearly; its tangent at the start is a descent direction for the
H-infinity cost.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy import linalg

from .certificate import assemble_N, certify, certify_lmi
from .errors import DimensionError, DomainError, NumericalError
from .lti import Controller, Plant, assemble_closed_loop
from .norm import hinf_norm

__all__ = [
    "CertifiedTriple",
    "LiftedVars",
    "LiftedPoint",
    "STRICT_FLOOR",
    "assemble_M",
    "in_F",
    "phi",
    "psi",
    "congruence_residuals",
    "congruence_check",
    "certified_triple",
    "descent_curve",
    "descent_direction",
    "membership",
]

#: eigenvalue floor for [[X, I], [I, Y]] in validated lifted points
STRICT_FLOOR = 1e-10


def _scale(*blocks):
    return 1.0 + max((np.linalg.norm(np.atleast_2d(b), 2) for b in blocks), default=0.0)


@dataclass(frozen=True)
class CertifiedTriple:
    """Controller with a certificate ``P`` at level ``gamma``."""

    k: Controller
    P: np.ndarray
    gamma: float

    def __post_init__(self):
        P = np.atleast_2d(np.array(self.P, dtype=float))
        n = 2 * self.k.order
        if P.shape != (n, n):
            raise DimensionError(f"P has shape {P.shape}, expected {(n, n)}", block="P")
        P = 0.5 * (P + P.T)
        P.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n(self):
        return self.k.order

    @property
    def P11(self):
        return self.P[: self.n, : self.n]

    @property
    def P12(self):
        return self.P[: self.n, self.n:]

    def as_dict(self):
        return {
            "DK": self.k.DK.tolist(), "CK": self.k.CK.tolist(),
            "BK": self.k.BK.tolist(), "AK": self.k.AK.tolist(),
            "P": self.P.tolist(), "gamma": self.gamma,
        }


@dataclass(frozen=True)
class LiftedVars:
    """The convex-set coordinates ``Z = (X, Y, M, H, F, G, gamma)``."""

    X: np.ndarray
    Y: np.ndarray
    M: np.ndarray
    H: np.ndarray
    F: np.ndarray
    G: np.ndarray
    gamma: float

    def __post_init__(self):
        for f in fields(self)[:-1]:
            a = np.atleast_2d(np.array(getattr(self, f.name), dtype=float))
            a.setflags(write=False)
            object.__setattr__(self, f.name, a)
        object.__setattr__(self, "gamma", float(self.gamma))

    def arrays(self):
        return (self.X, self.Y, self.M, self.H, self.F, self.G)

    def lerp(self, other, s):
        """``(1 - s) self + s other``."""
        mixed = [(1.0 - s) * a + s * b for a, b in zip(self.arrays(), other.arrays())]
        return LiftedVars(*mixed, (1.0 - s) * self.gamma + s * other.gamma)

    def scale(self):
        return _scale(*self.arrays(), [[self.gamma]])

    def as_dict(self):
        d = {f.name: getattr(self, f.name).tolist() for f in fields(self)[:-1]}
        d["gamma"] = self.gamma
        return d


@dataclass(frozen=True)
class LiftedPoint:
    """``(Xi, Z)`` with ``Xi = P12`` invertible and ``Z`` in the convex set."""

    Xi: np.ndarray
    Z: LiftedVars

    def __post_init__(self):
        a = np.atleast_2d(np.array(self.Xi, dtype=float))
        a.setflags(write=False)
        object.__setattr__(self, "Xi", a)

    def __getattr__(self, name):
        # flat access to X, Y, M, H, F, G, gamma
        if name in ("X", "Y", "M", "H", "F", "G", "gamma"):
            return getattr(self.Z, name)
        raise AttributeError(name)

    def as_dict(self):
        d = {"Xi": self.Xi.tolist()}
        d.update(self.Z.as_dict())
        return d


def _sym_check(name, S, n):
    if S.shape != (n, n):
        raise DimensionError(f"{name} has shape {S.shape}, expected {(n, n)}", block=name)


def assemble_M(X, Y, M, H, F, G, gamma, plant: Plant):
    """Affine 4x4 block matrix whose negative semidefiniteness defines the lifted set.

    Block order is (state, state, disturbance, performance output), matching
    the congruence with ``N(K, P, gamma)``.
    """
    X, Y, M, H, F, G = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (X, Y, M, H, F, G))
    nx, nw, nu, nz, ny = plant.nx, plant.nw, plant.nu, plant.nz, plant.ny
    for name, a, shape in (("X", X, (nx, nx)), ("Y", Y, (nx, nx)), ("M", M, (nx, nx)),
                           ("H", H, (nx, ny)), ("F", F, (nu, nx)), ("G", G, (nu, ny))):
        if a.shape != shape:
            raise DimensionError(f"{name} has shape {a.shape}, expected {shape}", block=name)
    A, B1, B2 = plant.A, plant.B1, plant.B2
    C1, D11, D12 = plant.C1, plant.D11, plant.D12
    C2, D21 = plant.C2, plant.D21
    AXF = A @ X + B2 @ F
    AG = A + B2 @ G @ C2
    BG = B1 + B2 @ G @ D21
    YAH = Y @ A + H @ C2
    YBH = Y @ B1 + H @ D21
    CXF = C1 @ X + D12 @ F
    CG = C1 + D12 @ G @ C2
    DG = D11 + D12 @ G @ D21
    return np.block([
        [AXF + AXF.T, M.T + AG, BG, CXF.T],
        [M + AG.T, YAH + YAH.T, YBH, CG.T],
        [BG.T, YBH.T, -gamma * np.eye(nw), DG.T],
        [CXF, CG, DG, -gamma * np.eye(nz)],
    ])


def _Mz(Z, plant):
    return assemble_M(Z.X, Z.Y, Z.M, Z.H, Z.F, Z.G, Z.gamma, plant)


def _xy(Z):
    n = Z.X.shape[0]
    return np.block([[Z.X, np.eye(n)], [np.eye(n), Z.Y]])


def in_F(Z: LiftedVars, plant, lmi_tol=None, strict_floor=STRICT_FLOOR):
    """Membership in the convex lifted set, at tolerance.

    Requires ``lambda_min([[X, I], [I, Y]]) >= strict_floor`` and
    ``lambda_max(Mcal) <= lmi_tol`` with default ``1e-8 * scale``.
    """
    if np.abs(Z.X - Z.X.T).max() > 1e-12 * Z.scale() or np.abs(Z.Y - Z.Y.T).max() > 1e-12 * Z.scale():
        return False
    Mz = _Mz(Z, plant)
    tol = 1e-8 * _scale(Mz) if lmi_tol is None else lmi_tol
    return bool(linalg.eigvalsh(_xy(Z))[0] >= strict_floor and linalg.eigvalsh(Mz)[-1] <= tol)


def membership(t: CertifiedTriple, plant, lmi_tol=None, p12_floor=0.0):
    """Diagnostics for the certified-triple tests; ``ok`` is the verdict.

    Checks ``P > 0``, ``sigma_min(P12) > p12_floor`` and
    ``lambda_max(N) <= lmi_tol`` (default ``1e-8 * (1 + ||N||)``).
    """
    N = assemble_N(plant, t.k, t.P, t.gamma)
    tol = 1e-8 * _scale(N) if lmi_tol is None else lmi_tol
    d = {
        "lambda_min_P": float(linalg.eigvalsh(t.P)[0]),
        "p12_sigma_min": float(linalg.svdvals(t.P12)[-1]),
        "lmi_max_eig": float(linalg.eigvalsh(N)[-1]),
        "lmi_tol": tol,
    }
    d["ok"] = d["lambda_min_P"] > 0 and d["p12_sigma_min"] > p12_floor and d["lmi_max_eig"] <= tol
    return d


def phi(t: CertifiedTriple, plant) -> LiftedPoint:
    """Forward map ``(K, P, gamma) -> (P12, (P^-1)11, P11, M, H, F, DK, gamma)``."""
    n = t.n
    if n != plant.nx:
        raise DimensionError(f"controller order {n} does not match nx={plant.nx}", block="K")
    lam = linalg.eigvalsh(t.P)[0]
    sig = linalg.svdvals(t.P12)[-1]
    if lam <= 0:
        raise DomainError(f"P is not positive definite (lambda_min={lam:.3e})")
    if sig <= 1e-14 * _scale(t.P):
        raise DomainError(f"P12 is singular (sigma_min={sig:.3e})")
    Pi = linalg.inv(t.P)
    Pi = 0.5 * (Pi + Pi.T)
    X, W = Pi[:n, :n], Pi[n:, :n]  # (P^-1)11, (P^-1)21
    Y, Xi = t.P11, t.P12
    k = t.k
    A, B2, C2 = plant.A, plant.B2, plant.C2
    M = (Xi @ k.BK @ C2 @ X + Y @ B2 @ k.CK @ W
         + Y @ (A + B2 @ k.DK @ C2) @ X + Xi @ k.AK @ W)
    H = Y @ B2 @ k.DK + Xi @ k.BK
    F = k.DK @ C2 @ X + k.CK @ W
    return LiftedPoint(Xi, LiftedVars(X, Y, M, H, F, k.DK, t.gamma))


def psi(xi, Z: LiftedVars, plant) -> CertifiedTriple:
    """Inverse map ``(Xi, Z) -> (K, P, gamma)``.

    ``P = [[Y, Xi], [Xi', Xi' (Y - X^-1)^-1 Xi]]`` and ``K`` solves the
    block-triangular change of variables with
    ``Pi = -Xi^-1 (Y - X^-1) X``.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    n = plant.nx
    _sym_check("Xi", xi, n)
    X, Y = 0.5 * (Z.X + Z.X.T), 0.5 * (Z.Y + Z.Y.T)
    sx = linalg.svdvals(xi)
    if sx[-1] <= 1e-14 * max(1.0, sx[0]):
        raise DomainError(f"Xi is singular (sigma_min={sx[-1]:.3e})")
    try:
        Xinv = linalg.inv(X)
    except linalg.LinAlgError as exc:
        raise DomainError("X is singular") from exc
    S = Y - Xinv
    S = 0.5 * (S + S.T)
    lam = linalg.eigvalsh(S)[0]
    if lam <= 0:
        raise DomainError(f"Y - X^-1 is not positive definite (lambda_min={lam:.3e})")
    Pi = -linalg.solve(xi, S @ X)
    if linalg.svdvals(Pi)[-1] <= 1e-14 * max(1.0, np.abs(Pi).max()):
        raise DomainError("Pi is singular")
    nu, ny = plant.nu, plant.ny
    L = np.block([[np.eye(nu), np.zeros((nu, n))], [Y @ plant.B2, xi]])
    mid = np.block([[Z.G, Z.F], [Z.H, Z.M - Y @ plant.A @ X]])
    R = np.block([[np.eye(ny), plant.C2 @ X], [np.zeros((n, ny)), Pi]])
    K = linalg.solve(R.T, linalg.solve(L, mid).T).T
    P22 = xi.T @ linalg.solve(S, xi, assume_a="pos")
    P = np.block([[Y, xi], [xi.T, 0.5 * (P22 + P22.T)]])
    return CertifiedTriple(Controller(K, nu, ny), P, Z.gamma)


def congruence_residuals(t: CertifiedTriple, plant):
    """Absolute residuals of the identities behind the lifting.

    Keys: ``PT`` (``PT = [[I, P11], [0, P12']]``), ``TPT``
    (``T'PT = [[X, I], [I, Y]]``), ``TPAT``, ``TPB``, ``CT`` (the closed-loop
    blocks under ``T``) and ``M`` (``Mcal = diag(T, I, I)' N diag(T, I, I)``).
    ``scale`` is ``1 + max`` norm of the blocks involved.
    """
    n = t.n
    lp = phi(t, plant)
    Z = lp.Z
    Pi = linalg.inv(t.P)
    T = np.block([[Pi[:n, :n], np.eye(n)], [Pi[n:, :n], np.zeros((n, n))]])
    cl = assemble_closed_loop(plant, t.k)
    P = t.P
    I, O = np.eye(n), np.zeros((n, n))
    A, B1, B2, C1, C2 = plant.A, plant.B1, plant.B2, plant.C1, plant.C2
    D12, D21 = plant.D12, plant.D21
    X, Y, M, H, F, G = Z.arrays()
    ref_pt = np.block([[I, t.P11], [O, t.P12.T]])
    ref_tpt = np.block([[X, I], [I, Y]])
    ref_tpat = np.block([[A @ X + B2 @ F, A + B2 @ G @ C2], [M, Y @ A + H @ C2]])
    ref_tpb = np.vstack([B1 + B2 @ G @ D21, Y @ B1 + H @ D21])
    ref_ct = np.hstack([C1 @ X + D12 @ F, C1 + D12 @ G @ C2])
    nw, nz = plant.nw, plant.nz
    big = linalg.block_diag(T, np.eye(nw), np.eye(nz))
    N = assemble_N(plant, t.k, P, t.gamma)
    Mz = _Mz(Z, plant)
    res = {
        "PT": np.abs(P @ T - ref_pt).max(),
        "TPT": np.abs(T.T @ P @ T - ref_tpt).max(),
        "TPAT": np.abs(T.T @ P @ cl.Acl @ T - ref_tpat).max(),
        "TPB": np.abs(T.T @ P @ cl.Bcl - ref_tpb).max(),
        "CT": np.abs(cl.Ccl @ T - ref_ct).max(),
        "M": np.abs(big.T @ N @ big - Mz).max(),
    }
    res = {k: float(v) for k, v in res.items()}
    res["scale"] = float(_scale(P, T, N, Mz, t.k.K))
    return res


def congruence_check(t: CertifiedTriple, plant):
    """Largest residual among :func:`congruence_residuals`."""
    r = congruence_residuals(t, plant)
    return max(v for key, v in r.items() if key != "scale")


def certified_triple(plant, k, gamma=None, rel_tol=1e-9, slack=None, p12_floor=0.0, center=False,
                     margin_cap=1.0):
    """Certify ``k`` and wrap the result as a :class:`CertifiedTriple`.

    By default certifies at ``J(k) / (1 - rel_tol)``. With ``center`` the
    certificate comes from a max-margin LMI search (margin capped at
    ``margin_cap``), which is well conditioned
    when ``gamma`` exceeds ``J(k)``. Raises ``DomainError`` when no
    certificate with invertible ``P12`` is found.
    """
    cl = assemble_closed_loop(plant, k)
    if gamma is None:
        gamma = hinf_norm(cl, rel_tol).gamma
        slack = rel_tol if slack is None else slack
    slack = 0.0 if slack is None else slack
    if center:
        cert = certify_lmi(cl, None, gamma / (1.0 - slack), center=True, margin_cap=margin_cap)
    else:
        cert = certify(cl, None, gamma, slack=slack)
    if not cert:
        raise DomainError(f"no certificate at gamma={gamma:.12g}: {cert.cause}")
    if not cert.p12_sigma_min > p12_floor:
        raise DomainError(f"certificate is degenerate (sigma_min(P12)={cert.p12_sigma_min:.3e})")
    return CertifiedTriple(k, cert.P, cert.gamma)


def _check_order(t, t_better):
    if not t_better.gamma < t.gamma:
        raise DomainError(
            f"the better triple must have a smaller level ({t_better.gamma:.12g} >= {t.gamma:.12g})")


def descent_curve(t: CertifiedTriple, t_better: CertifiedTriple, plant, s):
    """Point ``psi(Xi, Z + s (Z' - Z))`` on the certified descent curve.

    ``Xi`` stays at the current triple's ``P12``; the level of the result is
    ``(1 - s) gamma + s gamma'``.
    """
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    _check_order(t, t_better)
    lp, lq = phi(t, plant), phi(t_better, plant)
    if s == 0.0:
        return psi(lp.Xi, lp.Z, plant)
    return psi(lp.Xi, lp.Z.lerp(lq.Z, s), plant)


def descent_direction(t: CertifiedTriple, t_better: CertifiedTriple, plant, h=1e-6,
                      check=True, rtol=1e-3):
    """Finite-difference tangent of the controller along the descent curve.

    ``V = (K(psi(h)) - K(psi(0))) / h``. With ``check`` the quotient is
    compared against the one at ``h / 2``; disagreement beyond ``rtol``
    raises ``NumericalError``. A vanishing ``V`` also raises.
    """
    _check_order(t, t_better)
    lp, lq = phi(t, plant), phi(t_better, plant)
    k0 = psi(lp.Xi, lp.Z, plant).k.K

    def quotient(step):
        return (psi(lp.Xi, lp.Z.lerp(lq.Z, step), plant).k.K - k0) / step

    V = quotient(h)
    nv = np.linalg.norm(V)
    if not nv > 1e-10:
        raise NumericalError("descent direction vanished; try a smaller step or the start is near optimal",
                             norm=float(nv), h=h)
    if check:
        V2 = quotient(h / 2)
        err = np.linalg.norm(V2 - V) / nv
        if err > rtol:
            raise NumericalError("finite-difference tangent did not stabilize", rel_change=float(err), h=h)
    return V
