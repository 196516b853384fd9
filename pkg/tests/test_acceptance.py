"""Acceptance suite: one PASS/FAIL line per criterion at the stated tolerances."""
import time

import numpy as np
import pytest

from hinfland.certificate import certify_lmi, certify_riccati, is_nondegenerate
from hinfland.lifting import (CertifiedTriple, congruence_residuals, descent_curve,
                              descent_direction, in_F, membership, phi, psi)
from hinfland.lti import (assemble_closed_loop, frechet_bound, frechet_remainder, is_stable,
                          resolvent_hinf)
from hinfland.norm import J, directional_derivative_fd, hinf_norm, hinf_norm_grid_oracle
from hinfland.scan import ScanConfig, fit_degenerate_line, run_scan, slices
from hinfland.search import random_stabilizing, search
from hinfland.systems import random_certified_triple, random_stabilized_pair, random_stable_closed_loop

BOX = {"AK": (-2, 2), "BK": (-4, 4), "DK": (-1.5, 1.5)}


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@pytest.mark.slow
def test_criterion_1_norm(capsys):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        cl = random_stable_closed_loop(rng)
        g = hinf_norm(cl).gamma
        ref = hinf_norm_grid_oracle(cl, 100_000)
        worst = max(worst, abs(g - ref) / ref)
    dt = time.perf_counter() - t0
    report(capsys, 1, worst <= 1e-6 and dt <= 60,
           f"max rel diff {worst:.2e} (<= 1e-6), {dt:.1f} s (<= 60 s)")


@pytest.mark.slow
def test_criterion_2_bounded_real(capsys):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    bad = []
    for i in range(200):
        p, k = random_stabilized_pair(rng)
        cl = assemble_closed_loop(p, k)
        g = hinf_norm(cl).gamma
        verdicts = (bool(certify_riccati(cl, None, 1.01 * g)), bool(certify_lmi(cl, None, 1.01 * g)),
                    bool(certify_riccati(cl, None, 0.99 * g)), bool(certify_lmi(cl, None, 0.99 * g)))
        if verdicts != (True, True, False, False):
            bad.append(i)
    dt = time.perf_counter() - t0
    report(capsys, 2, not bad and dt <= 300,
           f"{200 - len(bad)}/200 systems consistent, {dt:.1f} s (<= 300 s)")


@pytest.fixture(scope="module")
def triples():
    rng = np.random.default_rng(1)
    return [random_certified_triple(rng) for _ in range(100)]


def test_criterion_3_roundtrip(capsys, triples):
    worst_t = worst_z = 0.0
    failed = 0
    for p, t in triples:
        lp = phi(t, p)
        back = psi(lp.Xi, lp.Z, p)
        scale = 1 + max(np.linalg.norm(t.k.K, 2), np.linalg.norm(t.P, 2))
        worst_t = max(worst_t, max(np.abs(back.k.K - t.k.K).max(), np.abs(back.P - t.P).max()) / scale)
        lp2 = phi(back, p)
        err = max(np.abs(a - b).max() for a, b in zip(lp2.Z.arrays() + (lp2.Xi,), lp.Z.arrays() + (lp.Xi,)))
        worst_z = max(worst_z, err / lp.Z.scale())
        failed += not (in_F(lp.Z, p) and membership(back, p)["ok"])
    ok = worst_t <= 1e-8 and worst_z <= 1e-8 and failed == 0
    report(capsys, 3, ok, f"psi(phi(t)) err {worst_t:.1e}, phi(psi(xi,Z)) err {worst_z:.1e} "
                          f"(<= 1e-8 scale), membership failures {failed}")


def test_criterion_4_congruence(capsys, triples):
    worst = {}
    for p, t in triples:
        r = congruence_residuals(t, p)
        for key, v in r.items():
            if key != "scale":
                worst[key] = max(worst.get(key, 0.0), v / r["scale"])
    m = max(worst.values())
    report(capsys, 4, m <= 1e-10, f"max residual / scale {m:.1e} (<= 1e-10) over {sorted(worst)}")


@pytest.fixture(scope="module")
def example_opt():
    from hinfland.synthesis import min_gamma
    from hinfland.systems import example_plant

    p = example_plant()
    return p, min_gamma(p)


def test_criterion_5_descent(capsys, example_opt):
    p, syn = example_opt
    tb = CertifiedTriple(syn.k_star, syn.cert.P, syn.gamma_star)
    bad = []
    worst_curve = -np.inf
    for seed in range(20):
        k = random_stabilizing(p, seed, BOX, fixed={"CK": 1.0})
        ok, cert = is_nondegenerate(p, k)
        assert ok, seed
        t = CertifiedTriple(k, cert.P, cert.gamma)
        V = descent_direction(t, tb, p)
        dd = directional_derivative_fd(p, k, V / np.linalg.norm(V)).value
        tau = 1e-3 * np.linalg.norm(k.K) / np.linalg.norm(V)
        if not (dd < 0 and J(p, k + tau * V) < J(p, k)):
            bad.append(seed)
        for s in np.arange(1, 10) / 10:
            c = descent_curve(t, tb, p, s)
            worst_curve = max(worst_curve, J(p, c.k) - ((1 - s) * t.gamma + s * tb.gamma))
    ok = not bad and worst_curve <= 1e-6
    report(capsys, 5, ok, f"{20 - len(bad)}/20 descent directions, "
                          f"max J excess along curve {worst_curve:.1e} (<= 1e-6)")


def test_criterion_6_search(capsys, example_opt):
    p, syn = example_opt
    rows = []
    for seed in range(10):
        k0 = random_stabilizing(p, seed, BOX, fixed={"CK": 1.0})
        tr = search(p, k0, budget=300, seed=seed)
        nd, _ = is_nondegenerate(p, tr.k)
        rows.append((tr.final[2], abs(tr.J - syn.gamma_star) / syn.gamma_star, nd))
    m = max(r[0] for r in rows)
    gap = max(r[1] for r in rows)
    n_nd = sum(r[2] for r in rows)
    ok = m <= 1e-4 and gap <= 0.01 and n_nd == 10
    report(capsys, 6, ok, f"max measure {m:.1e} (<= 1e-4), max |J/gamma*-1| {gap:.1e} (<= 1e-2), "
                          f"non-degenerate {n_nd}/10, gamma* {syn.gamma_star:.7f}")


@pytest.mark.slow
def test_criterion_7_scan(capsys):
    from hinfland.systems import example_plant

    cfg = ScanConfig()
    t0 = time.perf_counter()
    recs = list(run_scan(example_plant(), cfg))
    dt = time.perf_counter() - t0
    stab = [r for r in recs if r.stabilizing]
    uncert = [r for r in stab if r.error is not None or r.ln_abs_p12 is None]
    diag = np.hypot(cfg.a_range[1] - cfg.a_range[0], cfg.b_range[1] - cfg.b_range[0])
    fits = [fit_degenerate_line(sl, 0.02, cfg.ck) for sl in slices(recs).values()]
    rel = max(f.max_perp_dist / diag for f in fits)
    ok = not uncert and all(f.status == "ok" for f in fits) and rel <= 0.05 and dt <= 900
    report(capsys, 7, ok, f"{len(stab) - len(uncert)}/{len(stab)} stabilizing points certified, "
                          f"max perp dist {rel:.3f} of diagonal (<= 0.05), {dt:.0f} s (<= 900 s)")


def test_criterion_8_remainder(capsys):
    rng = np.random.default_rng(8)
    omegas = np.concatenate([[0.0], np.logspace(-3, 3, 400)])
    ts = (1e-2, 1e-3, 1e-4)
    bad = 0
    for _ in range(50):
        n = int(rng.integers(1, 6))
        while True:
            A = rng.standard_normal((n, n)) - 1.5 * np.eye(n)
            if is_stable(A):
                break
        D = rng.standard_normal((n, n))
        D /= np.linalg.norm(D, 2)
        r = [frechet_remainder(A, t * D, omegas) / t ** 2 for t in ts]
        b = [frechet_bound(A, t * D, omegas) / t ** 2 for t in ts]
        # the remainder is a difference of O(1) resolvents: allow its rounding error
        # (the bound is tight for scalar A at w = 0)
        slack = [64 * np.finfo(float).eps * resolvent_hinf(A, omegas) / t ** 2 for t in ts]
        below = all(x <= y + e for x, y, e in zip(r, b, slack))
        # the quotient settles: each change is smaller than the previous one
        settles = abs(r[2] - r[1]) <= abs(r[1] - r[0]) + 1e-9 * r[0]
        bounded = max(r) <= b[0] + slack[-1]
        bad += not (below and settles and bounded)
    report(capsys, 8, bad == 0, f"{50 - bad}/50 pairs: remainder/t^2 bounded, settling, below bound")
