"""Simulation of the coupled processes on the binary hierarchical lattice.

A tower of depth ``D`` over the ``(delta, alpha)``-contact process ``X`` on
``Omega^n`` is the Markov chain

    Z_0 = x,   Z_m = (Z_{m-1}, yt_m, y_m)   (m = 1..D)

where ``yt_m`` lives on ``Omega^(n-m)`` and is added on to the contact
component ``c_{m-1}`` of ``Z_{m-1}`` (``x`` for ``m = 1``, ``y_{m-1}``
otherwise) through the block kernel with parameter ``xi(m-1)``, and
``y_m`` is a contact process with parameters ``(delta(m), alpha(m))``
kept beneath ``yt_m``.

Rates of ``Z_m`` out of a state:

* every move ``z -> z'`` of ``Z_{m-1}`` at its rate times
  ``P(c', yt)/P(c, yt)``;
* every move ``yt -> yt'`` of the added-on generator at ``c``; when
  ``P(c, yt') = 0`` the parent jumps at the same time to ``z'`` with
  probability proportional to ``r(z, z') P(c', yt')`` (stays if all these
  weights vanish);
* ``y`` shares each recovery of ``yt``; an infection of ``yt`` at ``i``
  from an infected ``j`` (rate ``w a``) is shared with ``y`` with
  probability ``1/(2a)`` when ``y(j) = 1``; infections from healthy ``j``
  (rate ``w b``) are never shared;
* where ``yt(i) = 1`` and ``y(i) = 0``, ``y`` is infected on its own at
  rate ``sum_j (w/2) y(j)``.

The last item is needed because ``yt`` cannot be infected at an already
infected site, so there is no event to share.  With it, ``y`` jumps at
rates depending on ``y`` alone, hence it is a contact process and also an
autonomous component of ``Z_m``.  That makes ``Z_m`` a valid parent for the
next level: the kernel ``P(c_m, .)`` intertwines ``Z_m`` with the added-on
generators because it only looks at the autonomous component ``c_m``.
"""
from __future__ import annotations

import bisect
import math
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import accumulate

import numpy as np
from scipy.linalg import expm
from scipy.stats import chi2 as chi2_dist

from .bounds import recursion
from .exactgen import STAR_A, a_table, b_table, build_contact_generator, build_kernel
from .lattice import RateModel, index_hdist
from .simulate import SparseConfig, make_rng, origin_config, run_trajectory

__all__ = [
    "LevelParams",
    "CouplingState",
    "CouplingTower",
    "init_conditional",
    "run_coupled",
    "cascade",
    "cascade_init_stats",
    "cascade_survival_stats",
    "conditional_law_test",
    "marginal_test",
    "y_rate_check",
    "acceptance_probabilities",
]

SIGNIFICANCE = 1e-3


@dataclass(frozen=True)
class LevelParams:
    """Parameters of tower level ``m``: ``yt_m, y_m`` on ``Omega^(n-m)``."""

    level: int
    n_sites_log2: int
    delta: float  # delta(m), recovery of yt_m and y_m
    xi: float  # xi(m-1), kernel from level m-1 to level m
    partners: tuple  # partners[i] = ((j, w_ij), ...) with w = alpha_{k+1}(m-1) 2^-k


@dataclass
class CouplingState:
    x: SparseConfig
    ytilde: SparseConfig
    y: SparseConfig

    @classmethod
    def from_tuple(cls, state, n: int) -> "CouplingState":
        return cls(SparseConfig.from_bits(state[0], n), SparseConfig.from_bits(state[1], n - 1),
                   SparseConfig.from_bits(state[2], n - 1))


def _pair_list(L: int, weight) -> tuple:
    out = []
    for i in range(L):
        row = []
        for j in range(L):
            if i != j:
                w = weight(index_hdist(i, j))
                if w > 0:
                    row.append((j, w))
        out.append(tuple(row))
    return tuple(out)


def _kernel(c: int, yt: int, nblocks: int, xi: float) -> float:
    out = 1.0
    for b in range(nblocks):
        cnt = ((c >> (2 * b)) & 1) + ((c >> (2 * b + 1)) & 1)
        bit = (yt >> b) & 1
        if cnt == 1:
            out *= (1.0 - xi) if bit else xi
        elif (cnt == 2) != bool(bit):
            return 0.0
    return out


def _counts(c: int, nblocks: int) -> list[int]:
    return [((c >> (2 * b)) & 1) + ((c >> (2 * b + 1)) & 1) for b in range(nblocks)]


class CouplingTower:
    """Rate tables of the tower chain; transitions are memoised per state.

    Parameters are taken from ``bounds.recursion`` so that every level uses
    exactly the same floating-point ``delta(m)``, ``xi(m)`` and
    ``alpha_k(m)``.  ``freeze_x`` keeps ``x`` fixed (the parent has no moves
    and forced parent jumps are skipped), a test mode for the first level.
    """

    def __init__(self, model: RateModel, n: int, depth: int = 1, star=STAR_A,
                 freeze_x: bool = False, memo_limit: int = 500_000):
        if model.N != 2:
            raise ValueError("the coupling is defined for N = 2")
        if not 1 <= depth <= n:
            raise ValueError(f"depth must lie in 1..n, got depth={depth}, n={n}")
        if n > 6:
            raise ValueError("tower simulation supports n <= 6")
        self.model, self.n, self.depth, self.star, self.freeze_x = model, n, depth, star, freeze_x
        self.trace = recursion(model.delta, model.alpha, n)
        tr = self.trace
        self.top_partners = _pair_list(2 ** n, lambda k: tr.level_alpha(0, k) * 2.0 ** (-k))
        self.levels = [None]
        for m in range(1, depth + 1):
            self.levels.append(LevelParams(
                level=m,
                n_sites_log2=n - m,
                delta=tr.delta_seq[m],
                xi=tr.xi_seq[m - 1],
                partners=_pair_list(2 ** (n - m), lambda k, m=m: tr.level_alpha(m - 1, k + 1) * 2.0 ** (-k)),
            ))
        self._memo: dict = {}
        self.memo_limit = memo_limit
        self._A = {}
        self._B = {}
        for m in range(1, depth + 1):
            xi = self.levels[m].xi
            self._A[m] = a_table(xi, star).tolist()
            self._B[m] = b_table(xi, star).tolist()

    # -- parameters -------------------------------------------------------

    def level_params(self) -> list[dict]:
        tr = self.trace
        out = []
        for m in range(self.depth + 1):
            out.append({"level": m, "delta": tr.delta_seq[m],
                        "xi": tr.xi_seq[m] if m < len(tr.xi_seq) else None,
                        "alpha": [tr.level_alpha(m, k) for k in range(1, self.n - m + 1)]})
        return out

    # -- state helpers ----------------------------------------------------

    def initial_state(self, x0: int, rng) -> tuple:
        """``x0`` followed by ``yt_m ~ P(c_{m-1}, .)`` and ``y_m = yt_m``."""
        state = (x0,)
        c = x0
        for m in range(1, self.depth + 1):
            lp = self.levels[m]
            yt = 0
            for b, cnt in enumerate(_counts(c, 2 ** lp.n_sites_log2)):
                if cnt == 2 or (cnt == 1 and rng.random() >= lp.xi):
                    yt |= 1 << b
            state = state + (yt, yt)
            c = yt
        return state

    def kernel(self, m: int, c: int, yt: int) -> float:
        return _kernel(c, yt, 2 ** self.levels[m].n_sites_log2, self.levels[m].xi)

    def violations(self, state) -> tuple[int, int]:
        """(domination violations, kernel-support violations) in ``state``."""
        dom = sup = 0
        for m in range(1, (len(state) - 1) // 2 + 1):
            yt, y = state[2 * m - 1], state[2 * m]
            c = state[0] if m == 1 else state[2 * m - 2]
            if y & ~yt:
                dom += 1
            if not (self.freeze_x and m == 1) and self.kernel(m, c, yt) == 0.0:
                sup += 1
        return dom, sup

    # -- rates ------------------------------------------------------------

    def transitions(self, state) -> tuple[list, list, list]:
        """``(rates, targets, cumulative rates)`` out of ``state``."""
        hit = self._memo.get(state)
        if hit is not None:
            return hit
        moves = self._contact_moves(state[0]) if len(state) == 1 else self._pair_moves(state)
        targets = list(moves)
        rates = [moves[t] for t in targets]
        out = (rates, targets, list(accumulate(rates)))
        if len(self._memo) >= self.memo_limit:
            self._memo.clear()
        self._memo[state] = out
        return out

    def _contact_moves(self, x: int) -> dict:
        moves = {}
        if self.freeze_x:
            return moves
        delta = self.trace.delta_seq[0]
        for i, row in enumerate(self.top_partners):
            bit = 1 << i
            if x & bit:
                moves[(x ^ bit,)] = delta
            else:
                r = sum(w for j, w in row if (x >> j) & 1)
                if r > 0:
                    moves[(x | bit,)] = r
        return moves

    def _pair_moves(self, state) -> dict:
        m = (len(state) - 1) // 2
        lp = self.levels[m]
        parent = state[:-2]
        c = parent[-1]
        yt, y = state[-2], state[-1]
        nb = 2 ** lp.n_sites_log2
        frozen = self.freeze_x and m == 1
        moves: dict = defaultdict(float)
        prates, ptargets, _ = self.transitions(parent)

        p_c = _kernel(c, yt, nb, lp.xi)
        if p_c > 0:
            for r, pt in zip(prates, ptargets):
                cp = pt[-1]
                rr = r if cp == c else r * _kernel(cp, yt, nb, lp.xi) / p_c
                if rr > 0:
                    moves[pt + (yt, y)] += rr

        cnt = _counts(c, nb)
        A, B = self._A[m], self._B[m]
        ymoves: dict = defaultdict(float)
        solo_y = []
        for i in range(nb):
            bit = 1 << i
            if yt & bit:
                ymoves[(yt ^ bit, y & ~bit)] += lp.delta
                if not y & bit:
                    r = sum(0.5 * w for j, w in lp.partners[i] if (y >> j) & 1)
                    if r > 0:
                        solo_y.append((y | bit, r))
                continue
            shared = only = 0.0
            for j, w in lp.partners[i]:
                if (yt >> j) & 1:
                    wa = w * A[cnt[i]][cnt[j]]
                    s = 0.5 * w if (y >> j) & 1 else 0.0
                    shared += s
                    only += wa - s
                else:
                    only += w * B[cnt[i]][cnt[j]]
            if shared > 0:
                ymoves[(yt | bit, y | bit)] += shared
            if only > 0:
                ymoves[(yt | bit, y)] += only

        for (yt2, y2), r in ymoves.items():
            if frozen or _kernel(c, yt2, nb, lp.xi) > 0:
                moves[parent + (yt2, y2)] += r
                continue
            wts = [pr * _kernel(pt[-1], yt2, nb, lp.xi) for pr, pt in zip(prates, ptargets)]
            tot = math.fsum(wts)
            if tot == 0:
                moves[parent + (yt2, y2)] += r
            else:
                for wgt, pt in zip(wts, ptargets):
                    if wgt > 0:
                        moves[pt + (yt2, y2)] += r * wgt / tot
        for y2, r in solo_y:
            moves[parent + (yt, y2)] += r
        return moves

    # -- simulation -------------------------------------------------------

    def run(self, state, t_max: float, rng, record: bool = False) -> dict:
        """Gillespie simulation of the tower chain up to ``t_max``."""
        t, events = 0.0, 0
        dom = sup = 0
        traj = [(0.0, state)] if record else None
        while True:
            rates, targets, cum = self.transitions(state)
            if not cum or cum[-1] <= 0:
                break
            total = cum[-1]
            t += rng.expovariate(total)
            if t > t_max:
                break
            k = min(bisect.bisect_right(cum, rng.random() * total), len(cum) - 1)
            state = targets[k]
            events += 1
            d, s = self.violations(state)
            dom += d
            sup += s
            if record:
                traj.append((t, state))
        return {"state": state, "events": events, "domination_violations": dom,
                "support_violations": sup, "trajectory": traj}


def init_conditional(x0: SparseConfig, xi: float, seed: int, replica: int | None = None) -> SparseConfig:
    """Draw ``yt_0 ~ P(x0, .)`` block by block: 00 healthy, 11 infected,
    mixed blocks healthy with probability ``xi``."""
    if not 0 < xi <= 0.5:
        raise ValueError(f"xi must lie in (0, 1/2], got {xi}")
    if x0.N != 2 or x0.n < 1:
        raise ValueError("need a configuration on Omega_2^n with n >= 1")
    rng = make_rng(seed, replica)
    c = x0.to_bits()
    yt = 0
    for b, cnt in enumerate(_counts(c, 2 ** (x0.n - 1))):
        if cnt == 2 or (cnt == 1 and rng.random() >= xi):
            yt |= 1 << b
    return SparseConfig.from_bits(yt, x0.n - 1)


def run_coupled(model: RateModel, n: int, x0: SparseConfig, t_max: float, seed: int,
                replica: int | None = None, star=STAR_A, freeze_x: bool = False,
                tower: CouplingTower | None = None, ytilde0: SparseConfig | None = None) -> dict:
    """One trajectory of ``(X, Yt, Y)`` up to ``t_max``.

    The returned dict holds the final :class:`CouplingState`, the list of
    ``(t, CouplingState)`` after every event and the violation counters.
    """
    tower = tower or CouplingTower(model, n, 1, star, freeze_x)
    rng = make_rng(seed, replica)
    if ytilde0 is None:
        state = tower.initial_state(x0.to_bits(), rng)
    else:
        yb = ytilde0.to_bits()
        state = (x0.to_bits(), yb, yb)
    out = tower.run(state, t_max, rng, record=True)
    out["trajectory"] = [(t, CouplingState.from_tuple(s, n)) for t, s in out["trajectory"]]
    out["final"] = CouplingState.from_tuple(out["state"], n)
    return out


def cascade(model: RateModel, n: int, t_max: float, seed: int, replica: int | None = None,
            record: bool = False, tower: CouplingTower | None = None) -> dict:
    """Full tower from ``x0 = delta_0`` down to the single-site level.

    ``nonzero[m]`` tells whether ``X^(n-m)`` (``x`` for ``m = 0``, ``y_m``
    otherwise) is nonzero at ``t_max``; ``init_origin[m]`` whether it
    started as a single infection at the origin.
    """
    tower = tower or CouplingTower(model, n, n)
    rng = make_rng(seed, replica)
    s0 = tower.initial_state(1, rng)
    res = tower.run(s0, t_max, rng, record=record)
    contact = lambda s: [s[0]] + [s[2 * m] for m in range(1, tower.depth + 1)]
    res["init_origin"] = [c == 1 for c in contact(s0)]
    res["nonzero"] = [c != 0 for c in contact(res["state"])]
    res["params"] = tower.level_params()
    return res


def _binom_check(k, draws, p):
    k, p = int(k), float(p)
    sigma = math.sqrt(p * (1 - p) / draws)
    return {"observed": k / draws, "expected": p, "sigma": sigma,
            "z": (k / draws - p) / sigma if sigma > 0 else 0.0,
            "pass": bool(abs(k / draws - p) <= 3 * sigma + 1e-15)}


def cascade_init_stats(model: RateModel, n: int, draws: int, seed: int) -> dict:
    """Frequency of ``X^(n-m)_0 = delta_0`` against ``prod_{k<m}(1 - xi(k))``."""
    tower = CouplingTower(model, n, n)
    hits = [0] * (n + 1)
    for r in range(draws):
        s = tower.initial_state(1, make_rng(seed, r))
        for m in range(1, n + 1):
            hits[m] += s[2 * m] == 1
    prod = tower.trace.product_partial
    levels = [dict(level=m, **_binom_check(hits[m], draws, prod[m])) for m in range(1, n + 1)]
    return {"test": "cascade_init", "n": n, "draws": draws, "levels": levels,
            "pass": all(lv["pass"] for lv in levels)}


def _cascade_chunk(args):
    model, n, t, seed, lo, hi = args
    tower = CouplingTower(model, n, n)
    out = []
    for r in range(lo, hi):
        res = cascade(model, n, t, seed, r, tower=tower)
        out.append((res["nonzero"], res["domination_violations"], res["support_violations"]))
    return out


def _fan_out(fn, make_args, replicas: int, workers: int):
    if workers > 1:
        step = math.ceil(replicas / workers)
        chunks = [make_args(lo, min(lo + step, replicas)) for lo in range(0, replicas, step)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return [item for part in ex.map(fn, chunks) for item in part]
    return fn(make_args(0, replicas))


def cascade_survival_stats(model: RateModel, n: int, t: float, replicas: int, seed: int,
                           workers: int = 1) -> dict:
    """Per-level survival frequencies of the full tower.  The bottom level is
    compared with ``exp(-delta(n) t) prod_k (1 - xi(k))``; the top-down
    implication "level m zero => level m+1 zero" is counted."""
    rows = _fan_out(_cascade_chunk, lambda lo, hi: (model, n, t, seed, lo, hi), replicas, workers)
    tr = recursion(model.delta, model.alpha, n)
    nonzero = np.array([r[0] for r in rows], dtype=bool)
    freq = nonzero.mean(axis=0)
    implication_breaks = int(sum(np.any(~nz[:-1] & nz[1:]) for nz in nonzero))
    bottom = _binom_check(int(nonzero[:, -1].sum()), replicas,
                          tr.product_partial[n] * math.exp(-tr.delta_seq[n] * t))
    return {"test": "cascade_survival", "n": n, "t": t, "replicas": replicas,
            "level_survival": freq.tolist(), "bottom": bottom,
            "implication_breaks": implication_breaks,
            "domination_violations": int(sum(r[1] for r in rows)),
            "support_violations": int(sum(r[2] for r in rows)),
            "pass": bool(bottom["pass"] and implication_breaks == 0)}


def _coupled_chunk(args):
    model, n, t, seed, star, lo, hi = args
    tower = CouplingTower(model, n, 1, star)
    out = []
    for r in range(lo, hi):
        rng = make_rng(seed, r)
        res = tower.run(tower.initial_state(1, rng), t, rng)
        s = res["state"]
        out.append((s[0], s[1], res["events"], res["domination_violations"], res["support_violations"]))
    return out


def _sub_seeds(seed: int, k: int) -> list[int]:
    return [int(v) for v in np.random.SeedSequence(seed).generate_state(k, dtype=np.uint32)]


def conditional_law_test(model: RateModel, n: int, t: float, replicas: int, seed: int,
                         workers: int = 1, star=STAR_A, min_expected: float = 5.0) -> dict:
    """Chi-square comparison, per value ``x`` of ``X_t``, of the empirical law of
    ``Yt_t`` with the kernel row ``P(x, .)``, from ``x0 = delta_0``.

    Strata enter the test when every category with positive kernel mass has
    expected count at least ``min_expected``.  Point-mass strata are checked
    exactly.  Outcomes outside the kernel support count as failures.
    """
    if n not in (2, 3):
        raise ValueError("conditional-law test runs for n in {2, 3}")
    rows = _fan_out(_coupled_chunk, lambda lo, hi: (model, n, t, seed, star, lo, hi), replicas, workers)
    tower = CouplingTower(model, n, 1, star)
    xi = tower.levels[1].xi
    P = build_kernel(n, xi).toarray()
    by_x: dict = defaultdict(Counter)
    for x, yt, *_ in rows:
        by_x[x][yt] += 1
    strata, chi_tot, dof_tot = [], 0.0, 0
    outside = 0
    point_mass_ok = True
    for x in sorted(by_x):
        cnt = by_x[x]
        total = sum(cnt.values())
        support = np.nonzero(P[x])[0]
        bad = sum(v for y, v in cnt.items() if P[x, y] == 0)
        outside += bad
        entry = {"x": int(x), "n": total, "outside_support": bad,
                 "counts": {int(y): int(cnt.get(y, 0)) for y in support},
                 "expected": {int(y): float(total * P[x, y]) for y in support}}
        if len(support) == 1:
            ok = cnt.get(int(support[0]), 0) == total
            point_mass_ok &= ok
            entry.update(point_mass=True, pass_=ok)
        elif total * P[x, support].min() >= min_expected:
            obs = np.array([cnt.get(int(y), 0) for y in support], dtype=float)
            exp = total * P[x, support]
            stat = float(((obs - exp) ** 2 / exp).sum())
            dof = len(support) - 1
            entry.update(chi2=stat, dof=dof, p=float(chi2_dist.sf(stat, dof)))
            chi_tot += stat
            dof_tot += dof
        else:
            entry.update(skipped=True)
        strata.append(entry)
    pooled = float(chi2_dist.sf(chi_tot, dof_tot)) if dof_tot else None
    dom = int(sum(r[3] for r in rows))
    sup = int(sum(r[4] for r in rows))
    events = int(sum(r[2] for r in rows))
    passed = (pooled is not None and pooled > SIGNIFICANCE and outside == 0 and point_mass_ok
              and dom == 0 and sup == 0)
    return {"test": "conditional_law", "params": {"n": n, "t": t, "replicas": replicas, "seed": seed,
                                                  "delta": model.delta,
                                                  "alpha": model.alpha.to_json(), "xi": xi},
            "strata": strata, "pooled_chi2": chi_tot, "pooled_dof": dof_tot, "pooled_p": pooled,
            "inconclusive": pooled is None, "events": events, "domination_violations": dom,
            "support_violations": sup, "outside_support": outside, "pass": bool(passed)}


def _plain_chunk(args):
    model, n, t, seed, lo, hi = args
    init = origin_config(n)
    out = []
    for r in range(lo, hi):
        res = run_trajectory(model, n, init, t, seed, r)
        bits = 0
        for s in res.final_sites:
            bits |= 1 << s
        out.append(bits)
    return out


def _tv(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def marginal_test(model: RateModel, n: int, t: float, replicas: int, seed: int,
                  workers: int = 1, star=STAR_A, tol: float | None = None) -> dict:
    """Total-variation distance between the empirical laws of ``X_t`` under the
    coupled chain and under the plain simulator, both from ``delta_0``; for
    ``n <= 2`` also against the exact law from the matrix exponential."""
    s_c, s_p = _sub_seeds(seed, 2)
    S = 2 ** (2 ** n)
    coupled = _fan_out(_coupled_chunk, lambda lo, hi: (model, n, t, s_c, star, lo, hi), replicas, workers)
    plain = _fan_out(_plain_chunk, lambda lo, hi: (model, n, t, s_p, lo, hi), replicas, workers)
    pc = np.bincount([r[0] for r in coupled], minlength=S) / replicas
    pp = np.bincount(plain, minlength=S) / replicas
    out = {"test": "marginal", "params": {"n": n, "t": t, "replicas": replicas, "seed": seed,
                                          "delta": model.delta, "alpha": model.alpha.to_json()},
           "tv_coupled_plain": _tv(pc, pp)}
    if n <= 2:
        G = build_contact_generator(n, model.delta, model.alpha.values(n)).toarray()
        exact = expm(t * G)[1]
        out["tv_coupled_exact"] = _tv(pc, exact)
        out["tv_plain_exact"] = _tv(pp, exact)
    if tol is None:
        tol = 0.01 if n == 1 else 0.02
    key = "tv_coupled_exact" if n == 1 else "tv_coupled_plain"
    out["tolerance"] = tol
    out["pass"] = bool(out[key] < tol)
    return out


def y_rate_check(model: RateModel, n: int, state, draws: int = 0, seed: int = 0,
                 star=STAR_A) -> dict:
    """Rates at which ``y`` leaves its current value in the tower chain
    (summed over all joint transitions) versus the
    ``(delta', alpha')``-contact rates.  With ``draws > 0`` the first change
    of ``y`` is also sampled repeatedly from ``state`` and compared by
    chi-square with the contact rates."""
    tower = CouplingTower(model, n, 1, star)
    y = state[2]
    rates, targets, _ = tower.transitions(state)
    got: dict = defaultdict(float)
    for r, tg in zip(rates, targets):
        if tg[2] != y:
            got[tg[2]] += r
    lp = tower.levels[1]
    want: dict = {}
    for i in range(2 ** lp.n_sites_log2):
        bit = 1 << i
        if y & bit:
            want[y ^ bit] = lp.delta
        else:
            r = sum(0.5 * w for j, w in lp.partners[i] if (y >> j) & 1)
            if r > 0:
                want[y | bit] = r
    keys = sorted(set(got) | set(want))
    max_diff = max((abs(got.get(k, 0.0) - want.get(k, 0.0)) for k in keys), default=0.0)
    out = {"state": list(state), "rates": {int(k): got.get(k, 0.0) for k in keys},
           "contact_rates": {int(k): want.get(k, 0.0) for k in keys}, "max_abs_diff": max_diff}
    if draws:
        rng = make_rng(seed)
        counts = Counter()
        for _ in range(draws):
            s = state
            while s[2] == y:
                r_, tg, cum = tower.transitions(s)
                s = tg[min(bisect.bisect_right(cum, rng.random() * cum[-1]), len(cum) - 1)]
            counts[s[2]] += 1
        ks = sorted(want)
        tot = sum(want.values())
        obs = np.array([counts.get(k, 0) for k in ks], dtype=float)
        exp = np.array([draws * want[k] / tot for k in ks])
        stat = float(((obs - exp) ** 2 / exp).sum())
        out.update(chi2=stat, dof=len(ks) - 1, p=float(chi2_dist.sf(stat, len(ks) - 1)) if len(ks) > 1 else 1.0,
                   counts={int(k): int(counts.get(k, 0)) for k in ks})
    return out


def acceptance_probabilities(xi: float, star=STAR_A) -> list[float]:
    """``1/(2a)`` over the non-free entries of the ``a`` table (and the free
    entries under the given convention)."""
    A = a_table(xi, star)
    return sorted({float(0.5 / a) for a in A.ravel()})
