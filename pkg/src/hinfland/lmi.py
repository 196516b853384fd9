"""Small dense LMI feasibility solvers.

Constraints have the form ``S_i(theta) >= c_i I`` with each ``S_i`` affine in
the parameter vector ``theta``. Three methods are available:

``"conic"``
    the same phase-I problem handed to an SDP solver through cvxpy
    (Clarabel by default). Default, and the most reliable near the
    feasibility boundary.
``"barrier"``
    phase-I interior point: minimize ``t`` subject to
    ``S_i(theta) - c_i I + t I >= 0`` and ``||theta|| <= radius`` with a
    log-det barrier and damped Newton steps. Stops as soon as ``t <= tol``; reports infeasibility once
    the barrier lower bound ``t - m / tau`` exceeds ``tol``.
``"projections"``
    alternating projections between the product of shifted semidefinite
    cones (eigenvalue clipping) and the affine range ``{S(theta)}``.
"""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

__all__ = ["AffineLMI", "LMIResult", "svec_to_sym", "sym_to_svec"]


def svec_to_sym(theta, n):
    S = np.zeros((n, n))
    iu = np.triu_indices(n)
    S[iu] = theta
    return S + S.T - np.diag(np.diag(S))


def sym_to_svec(S):
    return np.asarray(S, dtype=float)[np.triu_indices(S.shape[0])]


@dataclass
class LMIResult:
    theta: np.ndarray
    status: str  # "feasible", "infeasible" or "undetermined"
    iterations: int
    violation: float
    gap: float

    @property
    def feasible(self):
        return self.status == "feasible"


class AffineLMI:
    """Affine family of symmetric blocks ``S_i(theta) = S_i0 + sum_j theta_j S_ij``.

    Parameters
    ----------
    fn : callable
        ``fn(theta) -> list of symmetric arrays``; must be affine in ``theta``.
    n_params : int
        Length of ``theta``.
    shifts : sequence of float
        Required lower eigenvalue bound of each block.
    """

    def __init__(self, fn, n_params, shifts):
        self.fn = fn
        self.n_params = n_params
        self.shifts = np.asarray(shifts, dtype=float)
        base = [np.asarray(b, dtype=float) for b in fn(np.zeros(n_params))]
        self.sizes = [b.shape[0] for b in base]
        self.base = base
        # coefficient matrices per block, shape (n_params, m, m)
        self.coef = [np.empty((n_params, m, m)) for m in self.sizes]
        for j in range(n_params):
            e = np.zeros(n_params)
            e[j] = 1.0
            for i, b in enumerate(fn(e)):
                self.coef[i][j] = np.asarray(b, dtype=float) - base[i]
        self.offset = np.concatenate([b.ravel() for b in base])
        self.A = np.column_stack([np.concatenate([c[j].ravel() for c in self.coef])
                                  for j in range(n_params)]) if n_params else np.zeros((self.offset.size, 0))
        self._qr = None
        self._slices = []
        start = 0
        for m in self.sizes:
            self._slices.append(slice(start, start + m * m))
            start += m * m

    def blocks(self, theta):
        return [b + np.tensordot(theta, c, axes=1) for b, c in zip(self.base, self.coef)]

    def violation(self, theta):
        """Largest amount by which any block's smallest eigenvalue misses its shift."""
        v = -np.inf
        for S, c in zip(self.blocks(theta), self.shifts):
            v = max(v, c - linalg.eigvalsh(0.5 * (S + S.T))[0])
        return float(v)

    def solve(self, theta0=None, tol=1e-9, method="conic", **kw):
        if method == "conic":
            return self._solve_conic(theta0, tol, **kw)
        if method == "barrier":
            return self._solve_barrier(theta0, tol, **kw)
        if method == "projections":
            return self._solve_projections(theta0, tol, **kw)
        raise ValueError(f"unknown method {method!r}")

    # -- external conic solver -------------------------------------------

    def _solve_conic(self, theta0, tol, max_iter=200, radius=None, solver="CLARABEL", center=False,
                     margin_cap=1.0):
        import cvxpy as cp

        p = self.n_params
        theta0 = np.zeros(p) if theta0 is None else np.asarray(theta0, dtype=float)
        v0 = self.violation(theta0)
        if v0 <= tol and not center:
            return LMIResult(theta0.copy(), "feasible", 0, v0, 0.0)
        # with center=True the optimum maximizes the common margin up to margin_cap
        if radius is None:
            radius = 1e6 * max(1.0, float(np.linalg.norm(theta0)))
        theta = cp.Variable(p)
        t = cp.Variable()
        cons = [cp.norm(theta) <= radius, t >= -margin_cap]
        for b, c, m, sh in zip(self.base, self.coef, self.sizes, self.shifts):
            Z = cp.reshape(c.reshape(p, m * m).T @ theta, (m, m), order="C") + (b - sh * np.eye(m))
            cons.append(0.5 * (Z + Z.T) + t * np.eye(m) >> 0)
        prob = cp.Problem(cp.Minimize(t), cons)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                prob.solve(solver=solver, max_iter=max_iter)
        except cp.error.SolverError:
            return LMIResult(theta0.copy(), "undetermined", 0, v0, np.nan)
        iters = int(prob.solver_stats.num_iters or 0)
        if theta.value is None:
            return LMIResult(theta0.copy(), "undetermined", iters, v0, np.nan)
        th = np.asarray(theta.value, dtype=float)
        viol = self.violation(th)
        if viol <= tol:
            return LMIResult(th, "feasible", iters, viol, float(t.value))
        if prob.status == cp.OPTIMAL and t.value > tol:
            return LMIResult(th, "infeasible", iters, viol, float(t.value))
        return LMIResult(th, "undetermined", iters, viol, float(t.value))

    # -- interior point --------------------------------------------------

    def _solve_barrier(self, theta0, tol, max_iter=500, tau_factor=10.0, target=None, radius=None):
        p = self.n_params
        theta = np.zeros(p) if theta0 is None else np.asarray(theta0, dtype=float).copy()
        target = tol if target is None else target
        # hard ball ||theta|| <= radius keeps the barrier bounded below
        if radius is None:
            radius = 1e6 * max(1.0, float(np.linalg.norm(theta)))
        r2 = radius ** 2
        m_total = float(sum(self.sizes)) + 1.0
        t = self.violation(theta)
        if t <= target:
            return LMIResult(theta, "feasible", 0, t, 0.0)
        t += 1.0 + abs(t)
        x = np.append(theta, t)
        eye_coef = [np.eye(m)[None] for m in self.sizes]
        coef = [np.concatenate([c, e]) for c, e in zip(self.coef, eye_coef)]
        shifted = [b - c * np.eye(m) for b, c, m in zip(self.base, self.shifts, self.sizes)]

        def Zs(x):
            return [s + np.tensordot(x, c, axes=1) for s, c in zip(shifted, coef)]

        def barrier(x, tau):
            slack = r2 - x[:-1] @ x[:-1]
            if slack <= 0:
                return np.inf
            val = tau * x[-1] - np.log(slack)
            for Z in Zs(x):
                try:
                    L = linalg.cholesky(0.5 * (Z + Z.T), lower=True)
                except linalg.LinAlgError:
                    return np.inf
                val -= 2.0 * np.sum(np.log(np.diag(L)))
            return val

        tau = m_total / max(1.0, abs(t))
        newton = 0
        while newton < max_iter:
            centered = False
            while newton < max_iter:
                newton += 1
                g = np.zeros(p + 1)
                g[-1] = tau
                H = np.zeros((p + 1, p + 1))
                for Z, c in zip(Zs(x), coef):
                    L = linalg.cholesky(0.5 * (Z + Z.T), lower=True)
                    Li = linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True)
                    W = Li @ c @ Li.T
                    Wf = W.reshape(p + 1, -1)
                    g -= np.trace(W, axis1=1, axis2=2)
                    H += Wf @ Wf.T
                slack = r2 - x[:-1] @ x[:-1]
                g[:-1] += 2.0 * x[:-1] / slack
                H[:-1, :-1] += 2.0 * np.eye(p) / slack + 4.0 * np.outer(x[:-1], x[:-1]) / slack ** 2
                H[np.diag_indices_from(H)] += 1e-14 * max(1.0, np.trace(H))
                try:
                    dx = -linalg.solve(H, g, assume_a="pos")
                except linalg.LinAlgError:
                    dx = -linalg.lstsq(H, g)[0]
                dec2 = float(-g @ dx)
                if dec2 / 2.0 <= 1e-9:
                    centered = True
                    break
                f0 = barrier(x, tau)
                step = 1.0
                while step > 1e-14:
                    fn = barrier(x + step * dx, tau)
                    if fn <= f0 - 0.25 * step * dec2:
                        break
                    step *= 0.5
                else:
                    # no decrease possible at working precision
                    centered = dec2 / 2.0 <= 1e-6
                    break
                x = x + step * dx
                if x[-1] <= target:
                    return LMIResult(x[:-1], "feasible", newton, float(x[-1]), 0.0)
            if not centered:
                break
            # on the central path t - t* <= m / tau
            lower = x[-1] - m_total / tau
            if lower > tol:
                return LMIResult(x[:-1], "infeasible", newton, float(x[-1]), float(lower))
            if m_total / tau < 1e-3 * tol:
                break
            tau *= tau_factor
        status = "feasible" if x[-1] <= target else "undetermined"
        return LMIResult(x[:-1], status, newton, float(x[-1]), float(x[-1] - m_total / tau))

    # -- alternating projections ---------------------------------------

    def _theta_of(self, s):
        if self._qr is None:
            self._qr = linalg.qr(self.A, mode="economic")
        q, r = self._qr
        return linalg.solve_triangular(r, q.T @ (s - self.offset))

    def _project_cone(self, s):
        out = np.empty_like(s)
        for sl, m, c in zip(self._slices, self.sizes, self.shifts):
            S = s[sl].reshape(m, m)
            w, U = linalg.eigh(0.5 * (S + S.T))
            w = np.maximum(w, c)
            out[sl] = ((U * w) @ U.T).ravel()
        return out

    def _solve_projections(self, theta0, tol, max_iter=50_000, check_every=10,
                           stall_window=400, stall_rel=1e-3):
        theta = np.zeros(self.n_params) if theta0 is None else np.asarray(theta0, dtype=float).copy()
        s = self.offset + self.A @ theta
        gaps = []
        viol = self.violation(theta)
        gap = np.inf
        for it in range(1, max_iter + 1):
            if viol <= tol:
                return LMIResult(theta, "feasible", it - 1, viol, gap if np.isfinite(gap) else 0.0)
            c = self._project_cone(s)
            theta = self._theta_of(c)
            s = self.offset + self.A @ theta
            gap = float(np.linalg.norm(c - s))
            gaps.append(gap)
            if it % check_every == 0:
                viol = self.violation(theta)
                if len(gaps) > stall_window:
                    old = gaps[-stall_window - 1]
                    # converged to a positive distance between the sets
                    if viol > tol and old - gap <= stall_rel * gap:
                        return LMIResult(theta, "infeasible", it, viol, gap)
                    gaps = gaps[-stall_window - 1:]
        viol = self.violation(theta)
        status = "feasible" if viol <= tol else "undetermined"
        return LMIResult(theta, status, max_iter, viol, gap)
