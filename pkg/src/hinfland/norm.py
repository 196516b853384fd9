"""H-infinity norm of a stable closed loop and derivatives of ``J(K)``.

The norm is computed with the Boyd-Balakrishnan / Bruinsma-Steinbuch level
iteration: a level ``gamma`` is exceeded by ``sigma_max(T(jw))`` somewhere iff
the associated Hamiltonian has eigenvalues on the imaginary axis, and the
midpoints of the crossing frequencies give a better lower bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .errors import DomainError, NumericalError
from .lti import (
    assemble_closed_loop,
    eval_transfer,
    freqresp,
    is_stable,
    lifted_io,
    sigma_max_at,
    spectral_abscissa,
)

__all__ = [
    "NormResult",
    "DirectionalEstimate",
    "INF_FREQ",
    "hamiltonian",
    "level_crossings",
    "hinf_norm",
    "hinf_norm_grid_oracle",
    "J",
    "sigma_gradient",
    "hinf_gradient",
    "directional_derivative_fd",
]

#: sentinel frequency for a supremum approached as w -> infinity
INF_FREQ = float("inf")

GAP_TOL = 1e-6
PEAK_TOL = 1e-6
IMAG_TOL = 1e-7


@dataclass(frozen=True)
class NormResult:
    gamma: float
    peak_omegas: tuple
    rel_tol: float
    bracket: tuple
    iterations: int = 0

    @property
    def omega(self):
        """Frequency of the largest peak."""
        return self.peak_omegas[0]

    def as_dict(self):
        return {
            "gamma": self.gamma,
            "peak_omegas": [float(w) for w in self.peak_omegas],
            "rel_tol": self.rel_tol,
            "bracket": list(self.bracket),
        }


def _sigma_d(cl):
    return float(linalg.svdvals(cl.Dcl)[0]) if cl.Dcl.size else 0.0


def hamiltonian(cl, gamma):
    """Hamiltonian whose imaginary-axis eigenvalues are the frequencies where
    ``sigma_max(T(jw)) = gamma``.

    Returns ``None`` when ``gamma <= sigma_max(Dcl)`` (the level is exceeded
    at infinity and the matrix is undefined).
    """
    A, B, C, D = cl.Acl, cl.Bcl, cl.Ccl, cl.Dcl
    R = gamma ** 2 * np.eye(D.shape[1]) - D.T @ D
    try:
        Rc = linalg.cho_factor(R)
    except linalg.LinAlgError:
        return None
    if np.min(np.diag(Rc[0])) ** 2 <= 1e-14 * gamma ** 2:
        return None
    RinvDtC = linalg.cho_solve(Rc, D.T @ C)
    RinvBt = linalg.cho_solve(Rc, B.T)
    Ah = A + B @ RinvDtC
    Q = C.T @ C + C.T @ D @ RinvDtC
    return np.block([[Ah, B @ RinvBt], [-Q, -Ah.T]])


def level_crossings(cl, gamma, imag_tol=IMAG_TOL):
    """Nonnegative frequencies where ``sigma_max(T(jw))`` crosses ``gamma``.

    Returns ``None`` if ``gamma <= sigma_max(Dcl)``; otherwise a sorted array,
    empty iff ``gamma`` exceeds the norm.
    """
    H = hamiltonian(cl, gamma)
    if H is None:
        return None
    ev = linalg.eigvals(H)
    scale = np.maximum(1.0, np.abs(ev))
    on_axis = np.abs(ev.real) <= imag_tol * scale
    w = np.sort(np.abs(ev[on_axis].imag))
    if w.size:
        keep = np.concatenate([[True], np.diff(w) > 1e-12 * np.maximum(1.0, w[1:])])
        w = w[keep]
    return w


def _sigma_many(cl, omegas):
    T = freqresp(cl, omegas)
    if T.shape[1] == 0 or T.shape[2] == 0:
        return np.zeros(len(omegas))
    return np.linalg.svd(T, compute_uv=False)[:, 0]


def _local_max(cl, a, b):
    """Maximize sigma_max on ``[a, b]``; returns ``(w, sigma)``."""
    if b <= a:
        return a, sigma_max_at(cl, a)
    res = optimize.minimize_scalar(
        lambda w: -sigma_max_at(cl, w),
        bounds=(a, b),
        method="bounded",
        options={"xatol": 1e-13 * max(1.0, b)},
    )
    w = float(res.x)
    best = [(w, -float(res.fun)), (a, sigma_max_at(cl, a)), (b, sigma_max_at(cl, b))]
    return max(best, key=lambda t: t[1])


def _seed_frequencies(cl, count=20):
    ev = linalg.eigvals(cl.Acl) if cl.n else np.array([])
    mags = np.abs(ev)
    rho = float(mags.max()) if mags.size and mags.max() > 0 else 1.0
    seeds = [0.0]
    seeds.extend(np.abs(ev.imag))
    seeds.extend(mags)
    seeds.extend(np.logspace(np.log10(rho) - 3, np.log10(rho) + 3, count))
    return np.unique(np.asarray(seeds, dtype=float)), rho


def hinf_norm(cl, rel_tol=1e-9, max_iter=200, imag_tol=IMAG_TOL, peak_tol=PEAK_TOL):
    """H-infinity norm of a stable closed loop.

    Parameters
    ----------
    cl : ClosedLoop
        Realization with Hurwitz ``Acl``.
    rel_tol : float
        Relative accuracy in ``(0, 1e-2]``; the true norm lies in
        ``[gamma, gamma * (1 + rel_tol)]``.
    imag_tol : float
        Real parts below ``imag_tol * max(1, |lambda|)`` count as imaginary.
    peak_tol : float
        Every local maximum within ``peak_tol * gamma`` of the norm is reported
        in ``peak_omegas``.

    Returns
    -------
    NormResult
        ``gamma`` is attained (``sigma_max_at(cl, w) == gamma`` at the first
        peak); ``peak_omegas`` may contain ``INF_FREQ``.
    """
    if not 0 < rel_tol <= 1e-2:
        raise ValueError("rel_tol must lie in (0, 1e-2]")
    if cl.n and not is_stable(cl.Acl):
        raise DomainError(
            f"closed loop is not stable (spectral abscissa {spectral_abscissa(cl.Acl):.3g})")

    sd = _sigma_d(cl)
    if cl.n == 0 or not np.any(cl.Bcl) or not np.any(cl.Ccl):
        return NormResult(sd, (INF_FREQ,), rel_tol, (sd, sd), 0)

    seeds, rho = _seed_frequencies(cl)
    sig = _sigma_many(cl, seeds)
    i = int(np.argmax(sig))
    lo, w_lo = float(sig[i]), float(seeds[i])
    if sd >= lo:
        lo, w_lo = sd, INF_FREQ
    if lo == 0.0:
        # T is identically zero on the seeds; the level test needs a positive level
        lo = np.finfo(float).tiny
    hi = None

    for it in range(1, max_iter + 1):
        level = lo * (1.0 + rel_tol)
        w = level_crossings(cl, level, imag_tol)
        if w is None:
            # level below sigma_max(D) cannot happen since lo >= sd; treat as progress stall
            hi = level
            break
        if w.size == 0:
            hi = level
            break
        grid = np.concatenate([[0.0], w, [2.0 * w[-1] + rho]])
        mids = 0.5 * (grid[:-1] + grid[1:])
        sm = _sigma_many(cl, mids)
        j = int(np.argmax(sm))
        w_best, s_best = _local_max(cl, grid[j], grid[j + 1])
        s_best = max(s_best, float(sm[j]))
        if s_best <= lo * (1.0 + 1e-15):
            # crossings are numerical artefacts of a tangency at the current level
            hi = level
            break
        lo, w_lo = s_best, (w_best if s_best > sm[j] else float(mids[j]))
    else:
        raise NumericalError("H-infinity level iteration did not converge", bracket=(lo, hi))

    gamma, peaks = _collect_peaks(cl, lo, w_lo, sd, rho, imag_tol, peak_tol)
    hi = max(hi, gamma)
    return NormResult(gamma, peaks, rel_tol, (gamma, hi), it)


def _collect_peaks(cl, gamma, w_gamma, sd, rho, imag_tol, peak_tol):
    """All local maxima within ``peak_tol`` of the norm, largest first."""
    level = gamma * (1.0 - peak_tol)
    cands = {}
    covered = False
    w = level_crossings(cl, level, imag_tol)
    if w is not None and w.size:
        grid = np.concatenate([[0.0], w, [2.0 * w[-1] + 10.0 * rho]])
        mids = 0.5 * (grid[:-1] + grid[1:])
        sm = _sigma_many(cl, mids)
        for j in np.nonzero(sm > level)[0]:
            a, b = grid[j], grid[j + 1]
            if np.isfinite(w_gamma) and a <= w_gamma <= b:
                covered = True
                wj, sj = w_gamma, sigma_max_at(cl, w_gamma)
                w2, s2 = _local_max(cl, a, b)
                if s2 > sj:
                    wj, sj = w2, s2
            else:
                wj, sj = _local_max(cl, a, b)
            cands[int(j)] = (float(wj), float(sj))
    if np.isfinite(w_gamma) and not covered:
        cands[-1] = (float(w_gamma), sigma_max_at(cl, w_gamma))
    if sd >= level:
        cands[-2] = (INF_FREQ, sd)
    peaks = sorted(cands.values(), key=lambda t: -t[1])
    gamma = max(gamma, peaks[0][1])
    peaks = [p for p in peaks if p[1] >= gamma * (1.0 - peak_tol)]
    # largest first, then deduplicate frequencies
    out = []
    for wp, _ in peaks:
        if all(abs(wp - q) > PEAK_TOL * max(1.0, abs(q)) for q in out if np.isfinite(q)) and \
                not (np.isinf(wp) and INF_FREQ in out):
            out.append(wp)
    return float(gamma), tuple(out)


def _golden_max(f, a, b, tol=1e-13, max_iter=200):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return max(fc, fd, f(a), f(b))


def hinf_norm_grid_oracle(cl, n_points=100_000):
    """Brute-force lower bound on the norm from a dense log-spaced grid.

    The grid spans ``[1e-4 rho, 1e4 rho]`` plus ``w = 0`` with ``rho`` the
    spectral radius of ``Acl``; the best grid point is refined by
    golden-section search between its neighbours and the limit
    ``sigma_max(Dcl)`` at infinity is included. Intended for tests.
    """
    if n_points < 1000:
        raise ValueError("n_points must be at least 1000")
    if cl.n and not is_stable(cl.Acl):
        raise DomainError("closed loop is not stable")
    sd = _sigma_d(cl)
    if cl.n == 0:
        return sd
    rho = float(np.max(np.abs(linalg.eigvals(cl.Acl))))
    rho = rho if rho > 0 else 1.0
    w = np.concatenate([[0.0], np.logspace(np.log10(rho) - 4, np.log10(rho) + 4, n_points)])
    sig = np.concatenate([_sigma_many(cl, w[i:i + 20000]) for i in range(0, w.size, 20000)])
    i = int(np.argmax(sig))
    a, b = w[max(i - 1, 0)], w[min(i + 1, w.size - 1)]
    refined = _golden_max(lambda x: sigma_max_at(cl, x), a, b)
    return float(max(sig[i], refined, sd))


def J(plant, k, rel_tol=1e-9):
    """H-infinity cost of controller ``k``; raises ``DomainError`` if not stabilizing."""
    return hinf_norm(assemble_closed_loop(plant, k), rel_tol).gamma


def _io_factors(plant, cl, omega):
    """``(L, Rt)`` with ``dT(jw)[V] = L V Rt``."""
    Bh, Ch, D12h, D21h = lifted_io(plant)
    if np.isinf(omega):
        return D12h.astype(complex), D21h.astype(complex)
    M = 1j * omega * np.eye(cl.n) - cl.Acl
    lu = linalg.lu_factor(M)
    RB = linalg.lu_solve(lu, cl.Bcl.astype(complex))
    RBh = linalg.lu_solve(lu, Bh.astype(complex))
    return D12h + cl.Ccl @ RBh, Ch @ RB + D21h


def sigma_gradient(plant, k, omega):
    """Gradient of ``sigma_max(T(j omega))`` with respect to ``K``.

    Returns ``(G, sigmas)`` where ``sigmas`` are the singular values of
    ``T(j omega)``; ``G`` is meaningful only when the top one is simple.
    """
    cl = assemble_closed_loop(plant, k)
    T = eval_transfer(cl, omega)
    U, s, Vh = linalg.svd(T)
    u, v = U[:, 0], Vh[0].conj()
    L, Rt = _io_factors(plant, cl, omega)
    G = np.real(np.outer(u.conj() @ L, Rt @ v))
    return G, s


def hinf_gradient(plant, k, norm=None, gap_tol=GAP_TOL, rel_tol=1e-10):
    """Gradient of ``J`` at ``k``, or ``None`` where ``J`` is not differentiable.

    Smoothness is declared when the norm has a single peak frequency and the
    top singular value there is separated from the next by at least
    ``gap_tol * gamma``. The derivative of ``T`` follows from
    ``dT[V] = (D12h + Ccl R Bh) V (Ch R Bcl + D21h)`` with
    ``R = (jwI - Acl)^{-1}``.
    """
    cl = assemble_closed_loop(plant, k)
    if not is_stable(cl.Acl):
        raise DomainError("controller is not stabilizing")
    if norm is None:
        norm = hinf_norm(cl, rel_tol)
    if len(norm.peak_omegas) != 1:
        return None
    G, s = sigma_gradient(plant, k, norm.peak_omegas[0])
    if s.size > 1 and s[0] - s[1] < gap_tol * norm.gamma:
        return None
    return G


@dataclass(frozen=True)
class DirectionalEstimate:
    value: float
    quotients: tuple
    steps: tuple


def directional_derivative_fd(plant, k, V, steps=(1e-3, 5e-4, 2.5e-4, 1.25e-4), rel_tol=1e-11):
    """One-sided estimate of ``lim_{t->0+} (J(K + tV) - J(K)) / t``.

    Difference quotients on the decreasing ``steps`` ladder are combined by
    first-order Richardson extrapolation of the last two.
    """
    V = np.asarray(V, dtype=float)
    if V.shape != k.K.shape:
        raise ValueError(f"direction has shape {V.shape}, expected {k.K.shape}")
    steps = tuple(float(t) for t in steps)
    if len(steps) < 2 or any(t <= 0 for t in steps) or any(a <= b for a, b in zip(steps, steps[1:])):
        raise ValueError("steps must be a strictly decreasing sequence of positive reals")
    if not np.any(V):
        return DirectionalEstimate(0.0, tuple(0.0 for _ in steps), steps)
    j0 = J(plant, k, rel_tol)
    qs = []
    for t in steps:
        kt = k + t * V
        if not is_stable(assemble_closed_loop(plant, kt).Acl):
            raise DomainError(f"K + t V leaves the stabilizing set at step t={t:g}")
        qs.append((J(plant, kt, rel_tol) - j0) / t)
    r = steps[-2] / steps[-1]
    value = (r * qs[-1] - qs[-2]) / (r - 1.0)
    return DirectionalEstimate(float(value), tuple(qs), steps)
