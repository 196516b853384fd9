"""Gradient-sampling policy search on the H-infinity cost.

``J(K)`` is locally Lipschitz and differentiable almost everywhere on the
stabilizing set, with kinks where several frequencies or singular values
are active. Gradients sampled in a small ball around ``K`` approximate the
Clarke subdifferential; the minimum-norm element of their convex hull is
both a stationarity measure and (negated) a descent direction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import DomainError
from .lti import Controller, assemble_closed_loop, is_stable
from .norm import hinf_gradient, hinf_norm

__all__ = [
    "ARMIJO_C",
    "StationarityResult",
    "SearchTrace",
    "min_norm_hull",
    "stationarity_measure",
    "search",
    "random_stabilizing",
]

log = logging.getLogger(__name__)

#: sufficient-decrease constant of the backtracking line search
ARMIJO_C = 1e-4


def min_norm_hull(G, tol=1e-8):
    """Minimum-norm point of the convex hull of the rows of ``G``.

    Solves ``min ||G' lam||^2`` over the probability simplex. Returns
    ``(point, lam)``.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    m = G.shape[0]
    if m == 1:
        return G[0].copy(), np.ones(1)
    Q = G @ G.T
    # start from the best single vertex
    lam0 = np.zeros(m)
    lam0[int(np.argmin(np.diag(Q)))] = 1.0
    res = optimize.minimize(
        lambda l: l @ Q @ l,
        lam0,
        jac=lambda l: 2.0 * Q @ l,
        bounds=[(0.0, 1.0)] * m,
        constraints=[{"type": "eq", "fun": lambda l: l.sum() - 1.0, "jac": lambda l: np.ones(m)}],
        method="SLSQP",
        options={"ftol": tol * tol, "maxiter": 500},
    )
    lam = np.clip(res.x, 0.0, None)
    lam /= lam.sum()
    if lam @ Q @ lam > lam0 @ Q @ lam0:
        lam = lam0
    return lam @ G, lam


@dataclass(frozen=True)
class StationarityResult:
    measure: float
    direction: np.ndarray  # negative min-norm hull element, controller shaped
    n_gradients: int
    n_resampled: int
    radius: float


def _ball(rng, shape, radius):
    d = int(np.prod(shape))
    v = rng.standard_normal(d)
    v *= radius * rng.uniform() ** (1.0 / d) / np.linalg.norm(v)
    return v.reshape(shape)


def stationarity_measure(plant, k, radius, n_samples=None, seed=0, include_center=True,
                         max_resample=None, rng=None):
    """Gradient-sampling estimate of ``dist(0, dJ(K))``.

    Draws ``n_samples`` (default ``2 dim(K) + 1``) uniform points in the
    Frobenius ball of ``radius`` around ``K``, takes :func:`hinf_gradient` at
    each (redrawing points where ``J`` is not differentiable) and returns the
    norm of the minimum-norm element of their convex hull. The gradient at
    ``K`` itself is included when it exists.

    Raises
    ------
    DomainError
        if ``K`` or any sample leaves the stabilizing set.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not is_stable(assemble_closed_loop(plant, k).Acl):
        raise DomainError("controller is not stabilizing")
    rng = np.random.default_rng(seed) if rng is None else rng
    d = k.K.size
    n_samples = 2 * d + 1 if n_samples is None else int(n_samples)
    max_resample = 10 * n_samples if max_resample is None else max_resample
    grads = []
    if include_center:
        g = hinf_gradient(plant, k)
        if g is not None:
            grads.append(g.ravel())
    resampled = 0
    while len(grads) < n_samples + include_center:
        kk = k + _ball(rng, k.K.shape, radius)
        if not is_stable(assemble_closed_loop(plant, kk).Acl):
            raise DomainError(f"sampling ball of radius {radius:g} leaves the stabilizing set; "
                              "use a smaller radius")
        g = hinf_gradient(plant, kk)
        if g is None:
            resampled += 1
            if resampled > max_resample:
                break
            continue
        grads.append(g.ravel())
        if not include_center and len(grads) >= n_samples:
            break
    if not grads:
        raise DomainError("no differentiable sample point found")
    p, _ = min_norm_hull(np.array(grads))
    return StationarityResult(float(np.linalg.norm(p)), -p.reshape(k.K.shape), len(grads),
                              resampled, float(radius))


@dataclass
class SearchTrace:
    """Accepted iterates ``(controller, J, measure, step)``."""

    iterates: list = field(default_factory=list)
    status: str = "running"  # converged | stalled | budget_exhausted
    seed: int = 0
    radius: float = float("nan")

    @property
    def final(self):
        return self.iterates[-1]

    @property
    def k(self):
        return self.iterates[-1][0]

    @property
    def J(self):
        return self.iterates[-1][1]

    def rows(self):
        for i, (_, j, m, s) in enumerate(self.iterates):
            yield i, j, m, s


def _cost(plant, k, rel_tol):
    cl = assemble_closed_loop(plant, k)
    if not is_stable(cl.Acl):
        return np.inf
    return hinf_norm(cl, rel_tol).gamma


def search(plant, k0, budget=200, seed=0, radius=None, ladder=(1.0, 0.1, 0.01), n_samples=None,
           tol_stat=1e-5, armijo_c=ARMIJO_C, max_backtracks=60, rel_tol=1e-11):
    """Gradient-sampling descent from ``k0``.

    At each iterate the sampling radius runs down the ``ladder`` (fractions
    of the initial radius, default ``1e-2 (1 + ||K0||)``): when the measure
    at the current radius is below ``tol_stat`` or the line search fails,
    the next smaller radius is used. Converged once the smallest radius
    reports a measure at most ``tol_stat``. Steps use Armijo backtracking
    ``J(K + a d) <= J(K) - c a ||d||^2``, halving ``a`` from
    ``max(1, (1 + ||K||) / ||d||)``, and reject any trial point outside the
    stabilizing set before evaluating ``J``.

    Returns
    -------
    SearchTrace
        ``iterates`` hold ``(Controller, J, measure, step)``; the first entry
        is ``k0`` with step 0.
    """
    rng = np.random.default_rng(seed)
    if not is_stable(assemble_closed_loop(plant, k0).Acl):
        raise DomainError("initial controller is not stabilizing")
    r0 = 1e-2 * (1.0 + np.linalg.norm(k0.K)) if radius is None else float(radius)
    radii = [r0 * f for f in ladder]
    trace = SearchTrace(seed=seed)
    k, j = k0, _cost(plant, k0, rel_tol)
    level = 0
    measure = np.nan
    trace.iterates.append((k, j, measure, 0.0))
    for it in range(budget):
        r = radii[level]
        try:
            st = stationarity_measure(plant, k, r, n_samples, rng=rng)
        except DomainError:
            # ball leaves the stabilizing set: shrink the rest of the ladder
            radii = radii[:level] + [x * 0.1 for x in radii[level:]]
            continue
        measure = st.measure
        trace.radius = r
        if measure <= tol_stat:
            if level + 1 == len(radii):
                trace.status = "converged"
                break
            level += 1
            continue
        dvec = st.direction
        dn2 = float(np.sum(dvec * dvec))
        # first trial moves K by about its own scale; halve from there
        a, accepted = max(1.0, (1.0 + np.linalg.norm(k.K)) / np.sqrt(dn2)), False
        for _ in range(max_backtracks):
            kt = k + a * dvec
            jt = _cost(plant, kt, rel_tol)
            if jt <= j - armijo_c * a * dn2:
                accepted = True
                break
            a *= 0.5
        if not accepted:
            if level + 1 == len(radii):
                trace.status = "stalled"
                break
            level += 1
            continue
        k, j = kt, jt
        trace.iterates.append((k, j, measure, a))
        log.debug("iter %d J=%.12g measure=%.3e step=%.3e radius=%.1e", it, j, measure, a, r)
    else:
        trace.status = "budget_exhausted"
    # record the final measure against the last iterate
    kk, jj, _, s = trace.iterates[-1]
    trace.iterates[-1] = (kk, jj, measure, s)
    return trace


def random_stabilizing(plant, seed=0, box=None, max_tries=10_000, fixed=None):
    """Rejection-sample a stabilizing controller with entries in a box.

    ``box`` maps block names (``"DK"``, ``"CK"``, ``"BK"``, ``"AK"``) to
    ``(lo, hi)``; unspecified blocks default to ``(-1, 1)``. ``fixed`` maps
    block names to arrays held constant.
    """
    rng = np.random.default_rng(seed)
    box = dict(box or {})
    fixed = dict(fixed or {})
    nx, nu, ny = plant.nx, plant.nu, plant.ny
    shapes = {"DK": (nu, ny), "CK": (nu, nx), "BK": (nx, ny), "AK": (nx, nx)}
    for _ in range(max_tries):
        blocks = {}
        for name, shape in shapes.items():
            if name in fixed:
                blocks[name] = np.broadcast_to(np.asarray(fixed[name], dtype=float), shape)
            else:
                lo, hi = box.get(name, (-1.0, 1.0))
                blocks[name] = rng.uniform(lo, hi, size=shape)
        k = Controller.from_blocks(blocks["DK"], blocks["CK"], blocks["BK"], blocks["AK"])
        if is_stable(assemble_closed_loop(plant, k).Acl):
            return k
    raise DomainError(f"no stabilizing controller in {max_tries} draws; "
                      "enlarge the box or start from a known stabilizing controller")
