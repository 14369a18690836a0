"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.

Closed-form oracles are written out here independently of the package.
"""
import math
import time

import numpy as np
import pytest
from scipy.stats import chisquare

from hiercontact import bounds, coupling, exactgen, simulate
from hiercontact.lattice import DoubleExp, Explicit, Geometric, RateModel, index_hdist


def xi_oracle(r):
    # smaller root of y^2 - 2 gamma y + 1/2 = 0, written in conjugate form
    gamma = 0.25 * (3.0 + 0.5 * r)
    return 0.5 / (gamma + math.sqrt(gamma * gamma - 0.5))


def random_params(rng, n):
    return float(rng.uniform(0.05, 5.0)), rng.uniform(0.01, 10.0, n).tolist()


# ---------------------------------------------------------------------------


def test_c01_intertwining(criterion):
    rng = np.random.default_rng(20240101)
    start = time.perf_counter()
    worst = {}
    for n, thr in ((1, 1e-12), (2, 1e-12), (3, 1e-10)):
        worst[f"I{n}"] = max(exactgen.intertwine_residual(n, *random_params(rng, n)) for _ in range(20)), thr
    for n, thr in ((1, 1e-12), (2, 1e-10)):
        worst[f"C{n}"] = max(exactgen.commute_residual(n, *random_params(rng, n)) for _ in range(20)), thr
    elapsed = time.perf_counter() - start
    ok = all(r < thr for r, thr in worst.values()) and elapsed < 30
    detail = ", ".join(f"{k}={r:.1e}" for k, (r, _) in worst.items()) + f", {elapsed:.1f}s"
    criterion(1, "intertwining and commutation residuals", ok, detail)


def test_c02_one_level_spectrum(criterion):
    worst_l = worst_v = 0.0
    for d in np.geomspace(0.05, 5.0, 10):
        for a1 in np.geomspace(0.01, 10.0, 10):
            d, a1 = float(d), float(a1)
            sp = exactgen.one_level_spectrum(d, a1)
            xi = xi_oracle(a1 / d)
            # the numerically computed leading eigenvalue against the closed form
            worst_l = max(worst_l, abs(sp["lambda_numeric"][0] - (-2.0 * d * xi)))
            worst_v = max(worst_v, float(np.abs(np.array(sp["eigvec"]) - [0.0, 1 - xi, 1 - xi, 1.0]).max()))
    ok = worst_l < 1e-12 and worst_v < 1e-12
    criterion(2, "one-level leading eigenpair", ok, f"eig {worst_l:.1e}, vec {worst_v:.1e}")


def closed_tables(xi):
    e = 1.0 - xi
    P00 = [[1, xi, 0], [xi, xi ** 2, 0], [0, 0, 0]]
    P01 = [[0, e, 1], [0, xi * e, xi], [0, 0, 0]]
    P11 = [[0, 0, 0], [0, e ** 2, e], [0, e, 1]]
    IP00 = [[0, -xi * e, 0], [0, -0.5 * xi ** 2, 0], [0, 0, 0]]
    IP01 = [[0, -e ** 2, -2 * e], [0, -0.5 * xi * e, -xi], [0, 0, 0]]
    IP11 = [[0, e ** 2, 2 * e], [0, 0.5 * xi * e, xi], [0, 0, 0]]
    return {k: np.array(v, dtype=float) for k, v in
            dict(P00=P00, P01=P01, P11=P11, IP00=IP00, IP01=IP01, IP11=IP11).items()}


def test_c03_two_level_tables(criterion):
    table_res = id_res = 0.0
    identical = True
    for xi in (0.05, 0.25, 0.5):
        reps = [exactgen.verify_two_level_tables(xi, star) for star in (exactgen.STAR_A, exactgen.STAR_B)]
        oracle = closed_tables(xi)
        for rep in reps:
            for k, v in oracle.items():
                table_res = max(table_res, float(np.abs(np.array(rep["tables"][k]) - v).max()))
            id_res = max(id_res, rep["identity_residual"], rep["intertwine_residual"])
        identical &= reps[0]["tables"] == reps[1]["tables"] and \
            reps[0]["identity_residual"] == reps[1]["identity_residual"]
    ok = table_res < 1e-14 and id_res < 1e-12 and identical
    criterion(3, "two-level tables and identities", ok,
              f"tables {table_res:.1e}, identities {id_res:.1e}, star-identical {identical}")


def test_c04_star_irrelevance(criterion):
    rng = np.random.default_rng(4)
    worst = 0.0
    for n in (1, 2, 3):
        for _ in range(10):
            d, a = random_params(rng, n)
            ra = exactgen.intertwine_residual(n, d, a, star=exactgen.STAR_A)
            rb = exactgen.intertwine_residual(n, d, a, star=exactgen.STAR_B)
            worst = max(worst, abs(ra - rb), ra, rb)
    criterion(4, "star-entry conventions agree", worst < 1e-12, f"max {worst:.1e}")


def exact_first_jump(model, n, infected):
    """Brute-force first-jump law by summing pair rates alpha_k N^-k."""
    size = model.N ** n
    law = {}
    for i in infected:
        law[("recover", i)] = model.delta
    for i in range(size):
        if i in infected:
            continue
        r = sum(model.alpha.value(index_hdist(i, j, model.N)) * model.N ** (-index_hdist(i, j, model.N))
                for j in infected)
        law[("infect", i)] = r
    tot = sum(law.values())
    return {k: v / tot for k, v in law.items()}


def test_c05_thinning_first_jump(criterion):
    start = time.perf_counter()
    draws = 10 ** 6
    pvals = []
    rng = np.random.default_rng(5)
    for N in (2, 3):
        size = N * N
        model = RateModel(N, 0.7, Explicit((1.3, 2.1)))
        half = set(rng.choice(size, size // 2, replace=False).tolist())
        for infected in ({0}, half, set(range(size))):
            cfg = simulate.SparseConfig(2, N, infected)
            counts = simulate.first_jump_counts(model, 2, cfg, draws, seed=N * 100 + len(infected))
            law = exact_first_jump(model, 2, infected)
            keys = sorted(law)
            obs = np.array([counts.get(k, 0) for k in keys], dtype=float)
            assert sum(obs) == draws
            pvals.append(float(chisquare(obs, draws * np.array([law[k] for k in keys])).pvalue))
    elapsed = time.perf_counter() - start
    ok = min(pvals) > 1e-3 and elapsed < 60
    criterion(5, "thinning sampler first-jump law", ok, f"min p {min(pvals):.3g}, {elapsed:.1f}s")


def test_c06_conditional_law(criterion):
    model = RateModel(2, 1.0, Explicit((2.0, 1.0)))
    rep = coupling.conditional_law_test(model, 2, 1.0, 100_000, seed=6)
    ok = rep["pooled_p"] > 1e-3 and rep["domination_violations"] == 0 and rep["events"] > 0
    criterion(6, "conditional law of the added-on process", ok,
              f"pooled p {rep['pooled_p']:.3g}, {rep['events']} events, "
              f"{rep['domination_violations']} domination violations")


def test_c07_marginal_consistency(criterion):
    model = RateModel(2, 1.0, Explicit((2.0, 1.0)))
    r2 = coupling.marginal_test(model, 2, 1.0, 100_000, seed=7)
    r1 = coupling.marginal_test(model, 1, 1.0, 100_000, seed=8)
    ok = r2["tv_coupled_plain"] < 0.02 and r1["tv_coupled_exact"] < 0.01
    criterion(7, "coupled X-marginal equals the contact process", ok,
              f"TV n=2 {r2['tv_coupled_plain']:.4f}, TV n=1 vs exact {r1['tv_coupled_exact']:.4f}")


def test_c08_survival_bound(criterion):
    start = time.perf_counter()
    model = RateModel(2, 0.1, Geometric(0.5))
    bound = bounds.finite_survival_bound(0.1, model.alpha, 3, 5.0)
    est = simulate.estimate_survival(model, 3, simulate.origin_config(3), 5.0, 100_000, seed=7)
    elapsed = time.perf_counter() - start
    ok = est["p_hat"] >= bound - 3 * est["stderr"] and elapsed < 300
    criterion(8, "Monte Carlo survival above the finite-level bound", ok,
              f"p_hat {est['p_hat']:.4f} +- {est['stderr']:.4f}, bound {bound:.4f}, {elapsed:.1f}s")


def test_c09_cascade_initialisation(criterion):
    model = RateModel(2, 1.0, Geometric(0.5))
    rep = coupling.cascade_init_stats(model, 3, 100_000, seed=9)
    # independent product of (1 - xi(k)) from the plain recursion
    d, prod, expected = 1.0, 1.0, []
    for k in range(3):
        xi = xi_oracle(2.0 ** -k * model.alpha.value(k + 1) / d)
        prod *= 1 - xi
        expected.append(prod)
        d *= 2 * xi
    zs = [lv["z"] for lv in rep["levels"]]
    agree = all(abs(lv["expected"] - e) < 1e-12 for lv, e in zip(rep["levels"], expected))
    ok = rep["pass"] and agree and len(zs) == 3
    criterion(9, "cascade initialisation frequencies", ok, "z = " + ", ".join(f"{z:+.2f}" for z in zs))


def test_c10_closed_forms(criterion):
    rel_eps = 0.0
    for delta, alpha in ((1e-3, DoubleExp(1.5)), (0.01, Geometric(0.5)), (0.2, Explicit((3.0, 1.0, 2.0, 0.5, 1.0)))):
        rep = bounds.eps_tilde_bounds(delta, alpha, 3)
        a1, a2, a3, a4 = alpha.values(4)
        closed = (9 * delta) ** 8 / 9 / (a4 * a3 * a2 ** 2 * a1 ** 4)
        rel_eps = max(rel_eps, abs(rep["iterated"][3] / closed - 1))
    rel_F = 0.0
    for alpha in (Geometric(0.5), DoubleExp(1.5), Explicit((0.7, 1.9, 0.4, 1.1, 2.3))):
        for eta in (0.1, 0.5, 2.0):
            for n in range(0, 5):
                rel_F = max(rel_F, abs(bounds.F_eta(alpha, eta, n) / bounds.F_eta_direct(alpha, eta, n) - 1))
    c7 = bounds.smallness_constants()["c7"]
    dom9 = bounds.eps_tilde_bounds(0.01, Geometric(0.5), 8, factor=9)
    dom7 = bounds.eps_tilde_bounds(0.01, Geometric(0.5), 8, factor=7)
    dom_ok = dom9["applicable"] and dom9["domination_holds"] and dom7["applicable"] and dom7["domination_holds"]
    ok = rel_eps < 1e-10 and rel_F < 1e-10 and dom_ok and abs(c7 - 0.024510410750544272) < 1e-12
    criterion(10, "closed forms and factor-9/7 domination", ok,
              f"eps rel {rel_eps:.1e}, F rel {rel_F:.1e}, c7 {c7:.6f}, domination {dom_ok}")


def test_c11_regimes(criterion):
    start = time.perf_counter()
    br = bounds.bracket_delta_c(DoubleExp(1.5), 2)
    grid = [10.0 ** -k for k in range(0, 5)]
    certs = [bounds.certify_extinction(d, DoubleExp(3.0), 2) for d in grid]
    verdicts = [bounds.survival_product(d, DoubleExp(3.0)).verdict for d in np.geomspace(1e-4, 10, 21)]
    elapsed = time.perf_counter() - start
    ok = br["lower"] > 0 and all(c is not None and c.is_valid() for c in certs) \
        and "positive" not in verdicts and elapsed < 120
    criterion(11, "survival for theta=1.5, extinction for theta=3", ok,
              f"theta=1.5 lower {br['lower']:.3g}; theta=3 certificates down to 1e-4: "
              f"{sum(c is not None for c in certs)}/{len(certs)}; {elapsed:.1f}s")


def test_c12_comparison(criterion):
    alpha = Geometric(0.5)
    red = bounds.compare_reduce(alpha, 3, 2.5)
    sandwich_ok = (red.m, red.n) == (4, 6) and 2.5 ** red.m <= 2 ** red.n <= 3 ** red.m
    dom = red.check_domination(8)
    delta, t = 0.1, 5.0
    bound = bounds.finite_survival_bound(delta, red.alpha_dprime, 3, t)
    est = simulate.estimate_survival(RateModel(3, delta, alpha), 2, simulate.origin_config(2, 3), t, 10_000, seed=12)
    mc_ok = bound <= est["p_hat"] + 3 * est["stderr"]
    ok = sandwich_ok and dom["block_min_equalities"] and dom["domination"] and mc_ok
    criterion(12, "comparison reduction from N=3 to N=2", ok,
              f"(m, n) = ({red.m}, {red.n}) expected (4, 6); block minima {dom['block_min_equalities']}; "
              f"bound {bound:.4f} <= MC {est['p_hat']:.4f}: {mc_ok}")


def test_c13_monotonicity(criterion):
    r = np.geomspace(1e-6, 1e6, 400)
    fv = [bounds.f(float(x)) for x in r]
    f_dec = all(b < a for a, b in zip(fv, fv[1:]))
    e = np.geomspace(1e-8, 1e2, 400)
    gv = [bounds.g(float(x)) for x in e]
    g_inc = all(b > a for a, b in zip(gv, gv[1:]))
    deltas = [0.01 * 1.2 ** k for k in range(26) if 0.01 * 1.2 ** k <= 1.0]
    pis = [bounds.survival_product(d, Geometric(0.5)).Pi_lower for d in deltas]
    pi_ok = all(b <= a for a, b in zip(pis, pis[1:]))
    model = RateModel(2, 1.0, Geometric(0.5))
    path_ok = True
    for seed in range(20):
        paths = simulate.coupled_delta_paths(model, [0.2, 0.5, 1.0, 2.0], 4, simulate.origin_config(4),
                                             2000, seed)
        for step in zip(*paths):
            path_ok &= all(hi <= lo for lo, hi in zip(step, step[1:]))
    ok = f_dec and g_inc and pi_ok and path_ok
    criterion(13, "monotonicity suite", ok,
              f"f dec {f_dec}, g inc {g_inc}, Pi nonincreasing {pi_ok}, coupled paths {path_ok}")
