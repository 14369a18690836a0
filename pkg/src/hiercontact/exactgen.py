"""Exact sparse generators on the configuration spaces ``S_n = {0,1}^(Omega^n)``
and numerical checks of the intertwining relations between the contact
process on ``S_n``, the block kernel ``P`` to ``S_{n-1}`` and the
added-on generators ``G'_x``.

A configuration is an integer whose bit ``site_index(i)`` holds ``x(i)``.
For ``N = 2`` the ``2``-block ``b`` of a configuration consists of the
bits ``2b`` and ``2b+1``.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm

from .bounds import f

MAX_EXACT_LEVEL = 4

#: (a*, b*) used where the tables leave the entry free
STAR_A = (0.5, 0.0)
STAR_B = (1.0, 1.0)

__all__ = [
    "MAX_EXACT_LEVEL",
    "STAR_A",
    "STAR_B",
    "n_states",
    "state_bits",
    "block_counts",
    "build_contact_generator",
    "build_kernel",
    "kernel_prob",
    "a_table",
    "b_table",
    "addon_params",
    "build_addon_generator",
    "build_joint_generator",
    "verify_intertwine",
    "verify_commute",
    "joint_marginal_check",
    "one_level_spectrum",
    "verify_two_level_tables",
    "two_level_closed_forms",
    "check_generator",
]


def n_states(n: int, N: int = 2) -> int:
    return 2 ** (N ** n)


def _check_level(n: int, N: int = 2):
    if n < 0:
        raise ValueError(f"level must be >= 0, got {n}")
    if N ** n > 2 ** MAX_EXACT_LEVEL:
        raise ValueError(f"exact mode supports at most {2 ** MAX_EXACT_LEVEL} sites, "
                         f"got N^n = {N ** n}")


def state_bits(n: int, N: int = 2) -> np.ndarray:
    """``(2^(N^n), N^n)`` array of site occupations, row ``s`` is state ``s``."""
    L = N ** n
    s = np.arange(2 ** L, dtype=np.int64)
    return ((s[:, None] >> np.arange(L)) & 1).astype(np.int8)


def block_counts(x: int, n: int) -> np.ndarray:
    """Number of infected sites (0, 1 or 2) in each 2-block of ``x`` in ``S_n``."""
    nb = 2 ** (n - 1)
    return np.array([((x >> (2 * b)) & 1) + ((x >> (2 * b + 1)) & 1) for b in range(nb)], dtype=np.int64)


def _pair_rates(n: int, alpha, N: int) -> np.ndarray:
    """``W[i, j] = alpha_k N^-k`` with ``k`` the hierarchical distance of ``i, j``."""
    L = N ** n
    W = np.zeros((L, L))
    for i in range(L):
        for j in range(L):
            if i == j:
                continue
            k, s, t = 0, i, j
            while s != t:
                s, t, k = s // N, t // N, k + 1
            a = alpha[k - 1] if k - 1 < len(alpha) else 0.0
            W[i, j] = a * float(N) ** (-k)
    return W


def check_generator(G, tol: float = 1e-14) -> float:
    """Assert nonnegative off-diagonals and zero row sums; return the largest
    row-sum deviation."""
    G = sp.csr_matrix(G)
    off = G - sp.diags(G.diagonal())
    if off.nnz and off.data.min() < 0:
        raise AssertionError("negative off-diagonal rate")
    dev = float(np.abs(np.asarray(G.sum(axis=1)).ravel()).max()) if G.shape[0] else 0.0
    scale = max(1.0, float(np.abs(G.diagonal()).max()) if G.shape[0] else 1.0)
    if dev > tol * scale:
        raise AssertionError(f"row sums deviate by {dev:.3e}")
    return dev


def _assemble(rows, cols, vals, dim: int) -> sp.csr_matrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    keep = vals > 0
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    off = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    off.sum_duplicates()
    diag = -np.asarray(off.sum(axis=1)).ravel()
    G = (off + sp.diags(diag)).tocsr()
    check_generator(G)
    return G


def build_contact_generator(n: int, delta: float, alpha, N: int = 2) -> sp.csr_matrix:
    """Generator of the ``(delta, alpha_1..alpha_n)``-contact process on ``S_n``."""
    _check_level(n, N)
    if delta <= 0:
        raise ValueError("delta must be positive")
    alpha = [float(a) for a in alpha]
    if any(a < 0 for a in alpha):
        raise ValueError("alpha must be nonnegative")
    L = N ** n
    B = state_bits(n, N).astype(float)
    states = np.arange(2 ** L, dtype=np.int64)
    W = _pair_rates(n, alpha, N)
    inf_rate = (B @ W.T) * (1.0 - B)  # rate at which healthy i gets infected
    rows, cols, vals = [], [], []
    for i in range(L):
        bit = np.int64(1) << i
        rec = B[:, i] > 0
        rows.append(states[rec]); cols.append(states[rec] ^ bit); vals.append(np.full(rec.sum(), delta))
        inf = inf_rate[:, i] > 0
        rows.append(states[inf]); cols.append(states[inf] | bit); vals.append(inf_rate[inf, i])
    return _assemble(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), 2 ** L)


def _p_table(xi: float) -> np.ndarray:
    # rows: block count 0, 1, 2; columns: coarse bit 0, 1
    return np.array([[1.0, 0.0], [xi, 1.0 - xi], [0.0, 1.0]])


def _check_xi(xi: float):
    if not 0.0 < xi <= 0.5:
        raise ValueError(f"xi must lie in (0, 1/2], got {xi}")


def build_kernel(n: int, xi: float) -> sp.csr_matrix:
    """Product kernel ``P(x, y) = prod_b p(x_b, y(b))`` from ``S_n`` to ``S_{n-1}``."""
    _check_level(n)
    if n < 1:
        raise ValueError("kernel needs n >= 1")
    _check_xi(xi)
    p = _p_table(xi)
    S = n_states(n)
    xs = np.arange(S, dtype=np.int64)
    rows, ys, ws = xs, np.zeros(S, dtype=np.int64), np.ones(S)
    for b in range(2 ** (n - 1)):
        cnt = ((rows >> (2 * b)) & 1) + ((rows >> (2 * b + 1)) & 1)
        new_r, new_y, new_w = [], [], []
        for yb in (0, 1):
            w = ws * p[cnt, yb]
            keep = w > 0
            new_r.append(rows[keep]); new_y.append(ys[keep] | (yb << b)); new_w.append(w[keep])
        rows, ys, ws = np.concatenate(new_r), np.concatenate(new_y), np.concatenate(new_w)
    P = sp.csr_matrix((ws, (rows, ys)), shape=(S, n_states(n - 1)))
    dev = float(np.abs(np.asarray(P.sum(axis=1)).ravel() - 1.0).max())
    if dev > 1e-15 * (2 ** (n - 1)):
        raise AssertionError(f"kernel rows deviate from 1 by {dev:.3e}")
    return P


def kernel_prob(x: int, y: int, n: int, xi: float) -> float:
    """Single entry ``P(x, y)``."""
    p = _p_table(xi)
    out = 1.0
    for b in range(2 ** (n - 1)):
        cnt = ((x >> (2 * b)) & 1) + ((x >> (2 * b + 1)) & 1)
        out *= p[cnt, (y >> b) & 1]
        if out == 0.0:
            return 0.0
    return out


def a_table(xi: float, star=STAR_A) -> np.ndarray:
    """``a(x_i, x_j)`` indexed by block counts; free entries set to ``star[0]``."""
    s = star[0]
    return np.array([[s, 1.0 - xi, 2.0 * (1.0 - xi)],
                     [s, 0.5, 1.0],
                     [s, s, s]])


def b_table(xi: float, star=STAR_A) -> np.ndarray:
    """``b(x_i, x_j)`` indexed by block counts; free entries set to ``star[1]``."""
    s = star[1]
    return np.array([[0.0, 1.0 - xi, s],
                     [0.0, 0.5, s],
                     [s, s, s]])


def addon_params(delta: float, alpha) -> tuple[float, float, list[float]]:
    """``(xi, delta', alpha')`` with ``xi = f(alpha_1/delta)``,
    ``delta' = 2 xi delta`` and ``alpha'_k = alpha_{k+1}/2``."""
    alpha = [float(a) for a in alpha]
    xi = f(alpha[0] / delta) if alpha else 0.5
    return xi, 2.0 * xi * delta, [a / 2.0 for a in alpha[1:]]


def build_addon_generator(x: int, n: int, delta_prime: float, alpha_prime, xi: float,
                          star=STAR_A) -> sp.csr_matrix:
    """Generator ``G'_x`` on ``S_{n-1}`` attached to ``x`` in ``S_n``.

    Recovery at rate ``delta'``; infection of ``i`` from ``j`` at distance
    ``k`` at rate ``2 alpha'_k 2^-k`` times ``a(x_i, x_j)`` when
    ``y(i, j) = (0, 1)`` and ``b(x_i, x_j)`` when ``y(i, j) = (0, 0)``.
    """
    _check_xi(xi)
    m = n - 1
    _check_level(m)
    L = 2 ** m
    cnt = block_counts(x, n)
    A, Bt = a_table(xi, star), b_table(xi, star)
    W = _pair_rates(m, [2.0 * a for a in alpha_prime], 2)
    WA = W * A[cnt[:, None], cnt[None, :]]
    WB = W * Bt[cnt[:, None], cnt[None, :]]
    np.fill_diagonal(WA, 0.0)
    np.fill_diagonal(WB, 0.0)
    Y = state_bits(m).astype(float)
    states = np.arange(2 ** L, dtype=np.int64)
    inf_rate = (Y @ WA.T + (1.0 - Y) @ WB.T) * (1.0 - Y)
    rows, cols, vals = [], [], []
    for i in range(L):
        bit = np.int64(1) << i
        rec = Y[:, i] > 0
        rows.append(states[rec]); cols.append(states[rec] ^ bit); vals.append(np.full(rec.sum(), delta_prime))
        inf = inf_rate[:, i] > 0
        rows.append(states[inf]); cols.append(states[inf] | bit); vals.append(inf_rate[inf, i])
    return _assemble(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), 2 ** L)


def _resolve(delta, alpha, xi):
    xi_true, dp, ap = addon_params(delta, alpha)
    if xi is None:
        return xi_true, dp, ap
    return xi, 2.0 * xi * delta, ap


def _addon_family(n, delta, alpha, xi, star):
    xi, dp, ap = _resolve(delta, alpha, xi)
    return xi, [build_addon_generator(x, n, dp, ap, xi, star) for x in range(n_states(n))]


def build_joint_generator(n: int, delta: float, alpha, xi: float | None = None,
                          star=STAR_A) -> sp.csr_matrix:
    """Generator of the pair ``(X, Y~)`` on ``S_n x S_{n-1}``; state
    ``(x, y)`` has index ``x * |S_{n-1}| + y``.

    ``X`` jumps ``x -> x'`` at rate ``r(x,x') P(x',y)/P(x,y)`` (zero when
    ``P(x,y) = 0``).  ``Y~`` jumps ``y -> y'`` at rate ``r'_x(y,y')``; if
    ``P(x,y') = 0`` then ``X`` jumps simultaneously to ``x'`` with
    probability proportional to ``r(x,x') P(x',y')``, or stays if all those
    weights vanish.
    """
    _check_level(n)
    G = build_contact_generator(n, delta, alpha).tocsr()
    xi, addons = _addon_family(n, delta, alpha, xi, star)
    P = build_kernel(n, xi).toarray()
    Sx, Sy = P.shape
    R = G.toarray()
    np.fill_diagonal(R, 0.0)
    RP = R @ P  # RP[x, y'] = sum_x' r(x,x') P(x',y')
    rows, cols, vals = [], [], []
    for x in range(Sx):
        nz = np.nonzero(R[x])[0]
        Gx = addons[x].tocoo()
        for y in range(Sy):
            if P[x, y] > 0:
                for xp in nz:
                    rate = R[x, xp] * P[xp, y] / P[x, y]
                    if rate > 0:
                        rows.append(x * Sy + y); cols.append(xp * Sy + y); vals.append(rate)
        for y, yp, r in zip(Gx.row, Gx.col, Gx.data):
            if y == yp:
                continue
            if P[x, yp] > 0 or RP[x, yp] == 0:
                rows.append(x * Sy + y); cols.append(x * Sy + yp); vals.append(r)
            else:
                q = R[x] * P[:, yp] / RP[x, yp]
                for xp in np.nonzero(q)[0]:
                    rows.append(x * Sy + y); cols.append(xp * Sy + yp); vals.append(r * q[xp])
    return _assemble(rows, cols, vals, Sx * Sy)


def _report(check, n, params, residual, threshold, **extra):
    out = {"check": check, "n": n, "params": params, "max_residual": float(residual),
           "threshold": threshold, "pass": bool(residual < threshold)}
    out.update(extra)
    return out


def _threshold(n):
    return 1e-12 if n <= 2 else 1e-10


def intertwine_residual(n: int, delta: float, alpha, xi: float | None = None, star=STAR_A) -> float:
    """``max |G P f - Pbar Gbar f|`` over indicator functions ``f`` on ``S_{n-1}``."""
    G = build_contact_generator(n, delta, alpha)
    xi, addons = _addon_family(n, delta, alpha, xi, star)
    P = build_kernel(n, xi)
    lhs = (G @ P).toarray()
    Pd = P.toarray()
    rhs = np.vstack([Pd[x] @ addons[x].toarray() for x in range(Pd.shape[0])])
    return float(np.abs(lhs - rhs).max())


def verify_intertwine(n: int, delta: float, alpha, xi: float | None = None, star=STAR_A,
                      threshold: float | None = None) -> dict:
    if n not in (1, 2, 3):
        raise ValueError("intertwining check runs for n in {1, 2, 3}")
    alpha = [float(a) for a in alpha][:n]
    res = intertwine_residual(n, delta, alpha, xi, star)
    thr = _threshold(n) if threshold is None else threshold
    params = {"delta": delta, "alpha": alpha, "xi": xi if xi is not None else addon_params(delta, alpha)[0],
              "xi_override": xi is not None, "star": list(star)}
    return _report("intertwine", n, params, res, thr)


def commute_residual(n: int, delta: float, alpha, xi: float | None = None, star=STAR_A) -> float:
    """``max |G Pbar f - Pbar Ghat f|`` over indicator functions on ``S_n x S_{n-1}``."""
    G = build_contact_generator(n, delta, alpha)
    xi_used = _resolve(delta, alpha, xi)[0]
    P = build_kernel(n, xi_used).toarray()
    Sx, Sy = P.shape
    Pbar = sp.csr_matrix((P.ravel(), (np.repeat(np.arange(Sx), Sy), np.arange(Sx * Sy))),
                         shape=(Sx, Sx * Sy))
    H = build_joint_generator(n, delta, alpha, xi, star)
    diff = (G @ Pbar) - (Pbar @ H)
    return float(np.abs(diff.toarray()).max()) if diff.nnz else 0.0


def verify_commute(n: int, delta: float, alpha, xi: float | None = None, star=STAR_A,
                   threshold: float | None = None) -> dict:
    if n not in (1, 2):
        raise ValueError("joint commutation check runs for n in {1, 2}")
    alpha = [float(a) for a in alpha][:n]
    res = commute_residual(n, delta, alpha, xi, star)
    thr = (1e-12 if n == 1 else 1e-10) if threshold is None else threshold
    params = {"delta": delta, "alpha": alpha, "star": list(star)}
    return _report("commute", n, params, res, thr)


def joint_marginal_check(n: int, delta: float, alpha, x0: int, t: float, star=STAR_A) -> dict:
    """X-marginal at time ``t`` of the joint chain started from
    ``delta_{x0} x P(x0, .)`` versus the law of the plain contact process."""
    if n > 2:
        raise ValueError("dense matrix exponentials are used only for n <= 2")
    alpha = [float(a) for a in alpha][:n]
    G = build_contact_generator(n, delta, alpha).toarray()
    xi = addon_params(delta, alpha)[0]
    P = build_kernel(n, xi).toarray()
    H = build_joint_generator(n, delta, alpha, None, star).toarray()
    Sx, Sy = P.shape
    mu0 = np.zeros(Sx * Sy)
    mu0[x0 * Sy:(x0 + 1) * Sy] = P[x0]
    joint = mu0 @ expm(t * H)
    marg = joint.reshape(Sx, Sy).sum(axis=1)
    plain = expm(t * G)[x0]
    cond = joint.reshape(Sx, Sy)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond_err = np.where(marg[:, None] > 1e-14, np.abs(cond - marg[:, None] * P), 0.0).max()
    return {"max_marginal_diff": float(np.abs(marg - plain).max()),
            "max_conditional_diff": float(cond_err),
            "x_law": marg.tolist(), "plain_law": plain.tolist()}


def one_level_spectrum(delta: float, alpha1: float) -> dict:
    """Spectrum of the one-level generator on symmetric functions vanishing at
    ``00``: closed form ``-2 delta (gamma -/+ sqrt(gamma^2 - 1/2))`` and a
    numerical eigensolve, with the leading eigenvector extended to ``S_1``
    (state order 0, 1, 2, 3) and scaled so its value at ``11`` is 1."""
    if delta <= 0 or alpha1 < 0:
        raise ValueError("need delta > 0 and alpha1 >= 0")
    gamma = 0.25 * (3.0 + 0.5 * alpha1 / delta)
    root = math.sqrt(gamma * gamma - 0.5)
    xi = f(alpha1 / delta)
    lead_closed = -2.0 * delta * xi
    sub_closed = -2.0 * delta * (gamma + root)
    M = np.array([[-(delta + 0.5 * alpha1), 0.5 * alpha1], [2.0 * delta, -2.0 * delta]])
    w, V = np.linalg.eig(M)
    order = np.argsort(-w.real)
    w, V = w.real[order], V.real[:, order]
    v = V[:, 0] / V[1, 0]
    eigvec = np.array([0.0, v[0], v[0], 1.0])
    R = build_contact_generator(1, delta, [alpha1]).toarray()
    return {
        "delta": delta,
        "alpha1": alpha1,
        "xi": xi,
        "lambda_lead": lead_closed,
        "lambda_sub": sub_closed,
        "lambda_numeric": w.tolist(),
        "eigvec": eigvec.tolist(),
        "eigvec_expected": [0.0, 1.0 - xi, 1.0 - xi, 1.0],
        "full_residual": float(np.abs(R @ eigvec - lead_closed * eigvec).max()),
    }


_LABELS = ("00", "01", "11")
# representative 2-block patterns for counts 0, 1, 2 (both choices for count 1)
_REPS = {0: (0,), 1: (1, 2), 2: (3,)}
# coarse states y on S_1 written y(0)y(1); bit b holds y(b)
_Y = {"00": 0, "01": 2, "10": 1, "11": 3}


def two_level_closed_forms(xi: float) -> dict:
    e = 1.0 - xi
    P00 = np.array([[1, xi, 0], [xi, xi * xi, 0], [0, 0, 0]], dtype=float)
    P01 = np.array([[0, e, 1], [0, xi * e, xi], [0, 0, 0]], dtype=float)
    P11 = np.array([[0, 0, 0], [0, e * e, e], [0, e, 1]], dtype=float)
    IP00 = np.array([[0, -xi * e, 0], [0, -0.5 * xi * xi, 0], [0, 0, 0]], dtype=float)
    IP01 = np.array([[0, -e * e, -2 * e], [0, -0.5 * xi * e, -xi], [0, 0, 0]], dtype=float)
    return {"P00": P00, "P01": P01, "P11": P11, "IP00": IP00, "IP01": IP01, "IP11": -IP01}


def _two_level_I() -> np.ndarray:
    # block-0 sites (0, 1) infected from block-1 sites (2, 3), rate 1/2 per pair
    I = np.zeros((16, 16))
    for x in range(16):
        for i in (0, 1):
            if (x >> i) & 1:
                continue
            for j in (2, 3):
                if (x >> j) & 1:
                    I[x, x | (1 << i)] += 0.5
    np.fill_diagonal(I, -I.sum(axis=1))
    return I


def _two_level_Iprime(x: int, xi: float, star) -> np.ndarray:
    c0, c1 = block_counts(x, 2)
    a, b = a_table(xi, star)[c0, c1], b_table(xi, star)[c0, c1]
    Ip = np.zeros((4, 4))
    Ip[_Y["01"], _Y["11"]] = a
    Ip[_Y["00"], _Y["10"]] = b
    np.fill_diagonal(Ip, -Ip.sum(axis=1))
    return Ip


def verify_two_level_tables(xi: float, star=STAR_A) -> dict:
    """Rebuild the two-level tables from the generator ``I`` and the kernel and
    compare with the closed forms; check ``IP(.,00) = -b P(.,00)``,
    ``IP(.,01) = -a P(.,01)``, ``IP(.,01) = -IP(.,11)`` and the full
    two-level intertwining ``I P = Pbar Ibar``."""
    _check_xi(xi)
    P = build_kernel(2, xi).toarray()
    I = _two_level_I()
    IP = I @ P
    closed = two_level_closed_forms(xi)
    built = {k: np.full((3, 3), np.nan) for k in closed}
    rep_spread = 0.0
    for c0 in range(3):
        for c1 in range(3):
            vals = {k: [] for k in closed}
            for r0 in _REPS[c0]:
                for r1 in _REPS[c1]:
                    x = r0 | (r1 << 2)
                    for lab in ("00", "01", "11"):
                        vals["P" + lab].append(P[x, _Y[lab]])
                        vals["IP" + lab].append(IP[x, _Y[lab]])
            for k, v in vals.items():
                built[k][c0, c1] = v[0]
                rep_spread = max(rep_spread, max(v) - min(v))
    table_res = max(float(np.abs(built[k] - closed[k]).max()) for k in closed)
    A, B = a_table(xi, star), b_table(xi, star)
    id_res = max(float(np.abs(built["IP00"] + B * built["P00"]).max()),
                 float(np.abs(built["IP01"] + A * built["P01"]).max()),
                 float(np.abs(built["IP01"] + built["IP11"]).max()))
    rhs = np.vstack([P[x] @ _two_level_Iprime(x, xi, star) for x in range(16)])
    inter_res = float(np.abs(IP - rhs).max())
    return {
        "check": "two-level",
        "params": {"xi": xi, "star": list(star)},
        "table_residual": table_res,
        "identity_residual": id_res,
        "intertwine_residual": inter_res,
        "representative_spread": rep_spread,
        "tables": {k: v.tolist() for k, v in built.items()},
        "labels": list(_LABELS),
        "max_residual": max(table_res, id_res, inter_res),
        "threshold": 1e-12,
        "pass": bool(table_res < 1e-14 and id_res < 1e-12 and inter_res < 1e-12 and rep_spread == 0.0),
    }
