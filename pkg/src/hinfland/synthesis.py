"""Reference optimum through the convex lifted set.

Minimizing ``gamma`` over the lifted set is a convex problem; bisection on
``gamma`` with an LMI feasibility test at each level gives a certified
upper bound ``gamma_star`` on the best achievable H-infinity cost, and the
lifted point at that level maps back (with ``Xi = I``) to a controller.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .certificate import Certificate, check_certificate
from .errors import DomainError, NumericalError
from .lifting import LiftedVars, assemble_M, psi
from .lmi import AffineLMI, svec_to_sym
from .lti import Controller, assemble_closed_loop, is_stable
from .norm import hinf_norm

__all__ = ["SynthesisResult", "Feasibility", "feasibility_F", "min_gamma"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Feasibility:
    status: str  # "feasible", "infeasible" or "undetermined"
    Z: LiftedVars | None
    violation: float
    iterations: int

    def __bool__(self):
        return self.status == "feasible"


@dataclass(frozen=True)
class SynthesisResult:
    gamma_star: float
    k_star: Controller
    cert: Certificate
    bracket: tuple
    Z: LiftedVars
    achieved: float  # H-infinity norm of k_star
    probes: int

    def as_dict(self):
        return {
            "gamma_star": self.gamma_star,
            "bracket": list(self.bracket),
            "achieved": self.achieved,
            "probes": self.probes,
            "DK": self.k_star.DK.tolist(), "CK": self.k_star.CK.tolist(),
            "BK": self.k_star.BK.tolist(), "AK": self.k_star.AK.tolist(),
            "P": self.cert.P.tolist(),
        }


def _unpack(theta, plant, gamma):
    nx, nu, ny = plant.nx, plant.nu, plant.ny
    s = nx * (nx + 1) // 2
    sizes = [s, s, nx * nx, nx * ny, nu * nx, nu * ny]
    parts = np.split(np.asarray(theta, dtype=float), np.cumsum(sizes)[:-1])
    X = svec_to_sym(parts[0], nx)
    Y = svec_to_sym(parts[1], nx)
    M = parts[2].reshape(nx, nx)
    H = parts[3].reshape(nx, ny)
    F = parts[4].reshape(nu, nx)
    G = parts[5].reshape(nu, ny)
    return X, Y, M, H, F, G


def _n_params(plant):
    nx, nu, ny = plant.nx, plant.nu, plant.ny
    return nx * (nx + 1) + nx * nx + nx * ny + nu * nx + nu * ny


def feasibility_F(plant, gamma, strict_floor=1e-8, max_iter=None, lmi_tol=None, method="conic"):
    """Search the lifted set at a fixed level ``gamma``.

    Looks for ``Z`` with ``[[X, I], [I, Y]] >= strict_floor I`` and
    ``Mcal(Z) <= lmi_tol I`` (default ``1e-8 (1 + ||Mcal(0)||)``). Returns a
    :class:`Feasibility`, truthy only when feasible.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    nx = plant.nx
    eye = np.eye(nx)

    def blocks(theta):
        X, Y, M, H, F, G = _unpack(theta, plant, gamma)
        return [np.block([[X, eye], [eye, Y]]), -assemble_M(X, Y, M, H, F, G, gamma, plant)]

    p = _n_params(plant)
    prob = AffineLMI(blocks, p, [strict_floor, 0.0])
    if lmi_tol is None:
        lmi_tol = 1e-8 * (1.0 + np.linalg.norm(prob.base[1], 2))
    # start from X = Y = 2I so the coupling block is comfortably positive
    theta0 = np.zeros(p)
    iu = np.triu_indices(nx)
    s = iu[0].size
    theta0[:s] = sym = (2.0 * eye)[iu]
    theta0[s:2 * s] = sym
    if max_iter is None:
        max_iter = {"conic": 200, "barrier": 500}.get(method, 50_000)
    res = prob.solve(theta0, tol=lmi_tol, method=method, max_iter=max_iter)
    Z = None
    if res.feasible:
        Z = LiftedVars(*_unpack(res.theta, plant, gamma), gamma)
    return Feasibility(res.status, Z, res.violation, res.iterations)


def _recover(plant, Z):
    t = psi(np.eye(plant.nx), Z, plant)
    cl = assemble_closed_loop(plant, t.k)
    if not is_stable(cl.Acl):
        raise NumericalError("recovered controller is not stabilizing", gamma=Z.gamma)
    return t, cl


def min_gamma(plant, rel_tol=1e-5, gamma_max=1e8, strict_floor=1e-8, max_probes=200):
    """Bisection on ``gamma`` over the lifted feasibility problem.

    The upper end is found by doubling from 1; "undetermined" probes count
    as infeasible so ``gamma_star`` stays an honest upper bound. The
    controller is recovered at ``gamma_star`` with ``Xi = I`` and checked
    with :func:`hinf_norm` and :func:`check_certificate`.
    """
    probes = 0
    hi, feas = 1.0, None
    lo = 0.0
    while True:
        probes += 1
        feas = feasibility_F(plant, hi, strict_floor)
        if feas:
            break
        lo = hi
        hi *= 2.0
        if hi > gamma_max:
            raise DomainError(f"no feasible level below {gamma_max:g}; is the plant stabilizable?")
    best = feas
    while hi - lo > rel_tol * hi and probes < max_probes:
        mid = 0.5 * (lo + hi)
        probes += 1
        feas = feasibility_F(plant, mid, strict_floor)
        log.debug("probe gamma=%.12g -> %s", mid, feas.status)
        if feas:
            hi, best = mid, feas
        else:
            lo = mid
    t, cl = _recover(plant, best.Z)
    achieved = hinf_norm(cl, min(rel_tol, 1e-9)).gamma
    cert = check_certificate(cl, None, t.P, hi, method="lifted")
    if not cert:
        raise NumericalError(f"recovered certificate rejected: {cert.cause}", gamma=hi, **cert.details)
    if achieved > hi * (1.0 + 1e-6):
        raise NumericalError("recovered controller exceeds its certified level",
                             gamma=hi, achieved=achieved)
    return SynthesisResult(hi, t.k, cert, (lo, hi), best.Z, achieved, probes)
