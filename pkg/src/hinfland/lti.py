"""State-space data model, closed-loop assembly and frequency response.

The plant is the standard continuous-time LTI generalized plant::

    dx/dt = A x + B1 w + B2 u
        z = C1 x + D11 w + D12 u
        y = C2 x + D21 w

and the controller is a full-order dynamic output feedback law packed into
the block matrix ``K = [[DK, CK], [BK, AK]]``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DimensionError, DomainError, NumericalError

__all__ = [
    "Plant",
    "Controller",
    "ClosedLoop",
    "STABILITY_SLACK",
    "assemble_closed_loop",
    "spectral_abscissa",
    "is_stabilizing",
    "is_stable",
    "eval_transfer",
    "freqresp",
    "sigma_max_at",
    "frechet_remainder",
    "frechet_bound",
    "resolvent_hinf",
]

# Eigenvalues with real part in [-STABILITY_SLACK - margin, ...) count as unstable.
STABILITY_SLACK = 1e-10


def _frozen(a, name, ndim=2):
    arr = np.array(a, dtype=float)
    if arr.ndim == 0 and ndim == 2:
        arr = arr.reshape(1, 1)
    if arr.ndim != ndim:
        raise DimensionError(f"{name} must be a {ndim}-d array, got shape {arr.shape}", block=name)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Plant:
    """Generalized plant ``(A, B1, B2, C1, D11, D12, C2, D21)``.

    Shapes are checked on construction. ``assumption_checked`` is set by
    :meth:`check_assumption` style diagnostics and carries no meaning for the
    numerical routines.
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    D11: np.ndarray
    D12: np.ndarray
    C2: np.ndarray
    D21: np.ndarray
    assumption_checked: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("A", "B1", "B2", "C1", "D11", "D12", "C2", "D21"):
            object.__setattr__(self, name, _frozen(getattr(self, name), name))
        nx = self.A.shape[0]
        if nx < 1 or self.A.shape != (nx, nx):
            raise DimensionError(f"A must be square with n_x >= 1, got {self.A.shape}", block="A")
        nw, nu = self.B1.shape[1], self.B2.shape[1]
        nz, ny = self.C1.shape[0], self.C2.shape[0]
        expected = {
            "B1": (nx, nw),
            "B2": (nx, nu),
            "C1": (nz, nx),
            "D11": (nz, nw),
            "D12": (nz, nu),
            "C2": (ny, nx),
            "D21": (ny, nw),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise DimensionError(f"{name} has shape {got}, expected {shape}", block=name)

    @property
    def nx(self):
        return self.A.shape[0]

    @property
    def nw(self):
        return self.B1.shape[1]

    @property
    def nu(self):
        return self.B2.shape[1]

    @property
    def nz(self):
        return self.C1.shape[0]

    @property
    def ny(self):
        return self.C2.shape[0]

    @property
    def controller_shape(self):
        return (self.nu + self.nx, self.ny + self.nx)

    def check_assumption(self, tol=1e-9):
        """Numerically test controllability of (A, B1), (A, B2) and
        observability of (C1, A), (C2, A).

        Returns a dict of booleans and a copy of the plant with
        ``assumption_checked=True``.
        """
        def ctrb_rank(a, b):
            n = a.shape[0]
            blocks = [b]
            for _ in range(n - 1):
                blocks.append(a @ blocks[-1])
            s = linalg.svdvals(np.hstack(blocks))
            return int(np.sum(s > tol * max(1.0, s[0]))) if s.size else 0

        n = self.nx
        report = {
            "ctrb_B1": ctrb_rank(self.A, self.B1) == n,
            "ctrb_B2": ctrb_rank(self.A, self.B2) == n,
            "obsv_C1": ctrb_rank(self.A.T, self.C1.T) == n,
            "obsv_C2": ctrb_rank(self.A.T, self.C2.T) == n,
        }
        checked = Plant(self.A, self.B1, self.B2, self.C1, self.D11, self.D12,
                        self.C2, self.D21, assumption_checked=True)
        return report, checked


@dataclass(frozen=True)
class Controller:
    """Dynamic controller stored as ``K = [[DK, CK], [BK, AK]]``.

    ``nu`` and ``ny`` fix the block split; the controller order is
    ``K.shape[0] - nu`` and must equal ``K.shape[1] - ny``.
    """

    K: np.ndarray
    nu: int
    ny: int

    def __post_init__(self):
        object.__setattr__(self, "K", _frozen(self.K, "K"))
        rows, cols = self.K.shape
        if self.nu < 0 or self.ny < 0 or rows - self.nu != cols - self.ny or rows - self.nu < 1:
            raise DimensionError(
                f"K of shape {self.K.shape} does not split as (nu={self.nu}, ny={self.ny}) "
                "with a square AK block", block="K")

    @classmethod
    def from_blocks(cls, DK, CK, BK, AK):
        DK, CK, BK, AK = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (DK, CK, BK, AK))
        nu, ny = DK.shape
        n = AK.shape[0]
        for name, m, shape in (("CK", CK, (nu, n)), ("BK", BK, (n, ny)), ("AK", AK, (n, n))):
            if m.shape != shape:
                raise DimensionError(f"{name} has shape {m.shape}, expected {shape}", block=name)
        return cls(np.block([[DK, CK], [BK, AK]]), nu, ny)

    @classmethod
    def zeros(cls, plant):
        return cls(np.zeros(plant.controller_shape), plant.nu, plant.ny)

    @property
    def order(self):
        return self.K.shape[0] - self.nu

    @property
    def DK(self):
        return self.K[: self.nu, : self.ny]

    @property
    def CK(self):
        return self.K[: self.nu, self.ny:]

    @property
    def BK(self):
        return self.K[self.nu:, : self.ny]

    @property
    def AK(self):
        return self.K[self.nu:, self.ny:]

    def with_matrix(self, K):
        return Controller(K, self.nu, self.ny)

    def __add__(self, V):
        return self.with_matrix(self.K + np.asarray(V, dtype=float))

    def similarity(self, S):
        """Controller with state transformed by ``S`` (same transfer function)."""
        S = np.atleast_2d(np.asarray(S, dtype=float))
        Si = np.linalg.inv(S)
        return Controller.from_blocks(self.DK, self.CK @ Si, S @ self.BK, S @ self.AK @ Si)


@dataclass(frozen=True)
class ClosedLoop:
    """Closed-loop realization ``(Acl, Bcl, Ccl, Dcl)``."""

    Acl: np.ndarray
    Bcl: np.ndarray
    Ccl: np.ndarray
    Dcl: np.ndarray

    def __post_init__(self):
        for name in ("Acl", "Bcl", "Ccl", "Dcl"):
            object.__setattr__(self, name, _frozen(getattr(self, name), name))
        n = self.Acl.shape[0]
        if self.Acl.shape != (n, n):
            raise DimensionError(f"Acl must be square, got {self.Acl.shape}", block="Acl")
        nw, nz = self.Dcl.shape[1], self.Dcl.shape[0]
        for name, shape in (("Bcl", (n, nw)), ("Ccl", (nz, n))):
            if getattr(self, name).shape != shape:
                raise DimensionError(
                    f"{name} has shape {getattr(self, name).shape}, expected {shape}", block=name)

    @property
    def n(self):
        return self.Acl.shape[0]

    def scaled_output(self, c):
        return ClosedLoop(self.Acl, self.Bcl, c * self.Ccl, c * self.Dcl)


def _check_controller(plant, k):
    if k.nu != plant.nu or k.ny != plant.ny or k.order != plant.nx:
        raise DimensionError(
            f"controller blocks (nu={k.nu}, ny={k.ny}, order={k.order}) do not match plant "
            f"(nu={plant.nu}, ny={plant.ny}, nx={plant.nx})", block="K")


def lifted_io(plant):
    """Matrices ``(Bh, Ch, D12h, D21h)`` with ``Acl = diag(A, 0) + Bh K Ch`` etc.

    All four closed-loop matrices are affine in ``K`` through these factors.
    """
    nx, nu, ny = plant.nx, plant.nu, plant.ny
    Bh = np.block([[plant.B2, np.zeros((nx, nx))], [np.zeros((nx, nu)), np.eye(nx)]])
    Ch = np.block([[plant.C2, np.zeros((ny, nx))], [np.zeros((nx, nx)), np.eye(nx)]])
    D12h = np.hstack([plant.D12, np.zeros((plant.nz, nx))])
    D21h = np.vstack([plant.D21, np.zeros((nx, plant.nw))])
    return Bh, Ch, D12h, D21h


def assemble_closed_loop(plant, k):
    """Closed-loop matrices of the plant in feedback with ``k``."""
    _check_controller(plant, k)
    A, B1, B2 = plant.A, plant.B1, plant.B2
    C1, D11, D12 = plant.C1, plant.D11, plant.D12
    C2, D21 = plant.C2, plant.D21
    DK, CK, BK, AK = k.DK, k.CK, k.BK, k.AK
    Acl = np.block([[A + B2 @ DK @ C2, B2 @ CK], [BK @ C2, AK]])
    Bcl = np.vstack([B1 + B2 @ DK @ D21, BK @ D21])
    Ccl = np.hstack([C1 + D12 @ DK @ C2, D12 @ CK])
    Dcl = D11 + D12 @ DK @ D21
    return ClosedLoop(Acl, Bcl, Ccl, Dcl)


def spectral_abscissa(A):
    try:
        ev = linalg.eigvals(A)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    return float(np.max(ev.real))


def is_stable(A, margin=0.0):
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return spectral_abscissa(A) < -margin - STABILITY_SLACK


def is_stabilizing(plant, k, margin=0.0):
    """True iff every closed-loop eigenvalue has real part below ``-margin``.

    A fixed slack of ``STABILITY_SLACK`` is applied so that marginal cases
    (eigenvalues on the axis up to rounding) are always classified unstable.
    """
    return is_stable(assemble_closed_loop(plant, k).Acl, margin)


def eval_transfer(cl, omega):
    """``T(j omega) = Ccl (j omega I - Acl)^{-1} Bcl + Dcl``.

    ``omega = inf`` returns ``Dcl``.
    """
    if np.isinf(omega):
        return cl.Dcl.astype(complex)
    n = cl.n
    try:
        with warnings.catch_warnings():
            # an exactly singular factor is reported below as a pole
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            lu = linalg.lu_factor(1j * omega * np.eye(n) - cl.Acl, check_finite=False)
    except linalg.LinAlgError as exc:
        raise DomainError(f"j*{omega} is a pole of the closed loop") from exc
    if np.min(np.abs(np.diag(lu[0]))) <= np.finfo(float).eps * max(1.0, np.abs(lu[0]).max()):
        raise DomainError(f"j*{omega} is a pole of the closed loop")
    X = linalg.lu_solve(lu, cl.Bcl.astype(complex), check_finite=False)
    return cl.Ccl @ X + cl.Dcl


def freqresp(cl, omegas):
    """Batched frequency response, shape ``(len(omegas), nz, nw)``."""
    omegas = np.asarray(omegas, dtype=float).ravel()
    finite = np.isfinite(omegas)
    out = np.empty((omegas.size,) + cl.Dcl.shape, dtype=complex)
    out[~finite] = cl.Dcl
    if np.any(finite):
        w = omegas[finite]
        M = 1j * w[:, None, None] * np.eye(cl.n) - cl.Acl
        X = np.linalg.solve(M, np.broadcast_to(cl.Bcl.astype(complex), (w.size,) + cl.Bcl.shape))
        out[finite] = cl.Ccl @ X + cl.Dcl
    return out


def sigma_max_at(cl, omega):
    """Largest singular value of ``T(j omega)``."""
    T = eval_transfer(cl, omega)
    if T.size == 0:
        return 0.0
    return float(linalg.svdvals(T)[0])


def _resolvent_norms(A, omegas):
    n = A.shape[0]
    M = 1j * np.asarray(omegas)[:, None, None] * np.eye(n) - A
    s = np.linalg.svd(M, compute_uv=False)
    return 1.0 / s[:, -1]


def resolvent_hinf(A, omegas):
    """Grid estimate of ``sup_w ||(jwI - A)^{-1}||_2``."""
    return float(np.max(_resolvent_norms(A, omegas)))


def frechet_remainder(A, Delta, omegas):
    """Grid estimate of the first-order remainder of ``A -> (sI - A)^{-1}``.

    Returns ``max_w ||(s - A - D)^{-1} - (s - A)^{-1} - (s - A)^{-1} D (s - A)^{-1}||_2``
    with ``s = j w`` over ``omegas``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Delta = np.atleast_2d(np.asarray(Delta, dtype=float))
    if not is_stable(A):
        raise DomainError("A is not stable")
    if not is_stable(A + Delta):
        raise DomainError("A + Delta is not stable")
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    n = A.shape[0]
    eye = np.eye(n)
    S = 1j * omegas[:, None, None] * eye
    R = np.linalg.inv(S - A)
    Rp = np.linalg.inv(S - A - Delta)
    rem = Rp - R - R @ Delta @ R
    return float(np.max(np.linalg.norm(rem, ord=2, axis=(1, 2))))


def frechet_bound(A, Delta, omegas):
    """Closed-form bound ``r^3 ||D||^2 / (1 - r ||D||)`` with ``r`` the grid
    estimate of the resolvent H-infinity norm.

    Returns ``inf`` when ``r ||D|| >= 1`` (bound not applicable).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Delta = np.atleast_2d(np.asarray(Delta, dtype=float))
    r = resolvent_hinf(A, np.atleast_1d(omegas))
    d = float(np.linalg.norm(Delta, 2))
    if r * d >= 1.0:
        return float("inf")
    return r ** 3 * d ** 2 / (1.0 - r * d)
